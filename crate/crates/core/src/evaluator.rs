//! Error rates, label-budget sweeps, PCA and feature export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kernel::Tensor2;
use crate::nets::ComponentBundle;
use crate::store::{select_labeled, EmbeddingDataset};
use crate::trainer::{fit, Method};

const EVAL_CHUNK: usize = 256;

/// Fraction of rows whose argmax logit differs from the label.
pub fn error_from_logits(logits: &Tensor2, labels: &[i32]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::dim("error_rate", logits.shape(), (labels.len(), logits.cols())));
    }
    if labels.is_empty() {
        return Err(Error::Contract("error rate of an empty split".into()));
    }
    let mut wrong = 0usize;
    for (row, (pred, &label)) in logits.argmax_rows().into_iter().zip(labels).enumerate() {
        if label < 0 {
            return Err(Error::Contract(format!("test row {row} is unlabeled")));
        }
        wrong += usize::from(pred != label as usize);
    }
    Ok(wrong as f64 / labels.len() as f64)
}

/// Test error of the content head with dropout disabled.
pub fn error_rate(bundle: &ComponentBundle, test: &EmbeddingDataset) -> Result<f64> {
    if test.cls_dim != bundle.cls_dim {
        return Err(Error::dim("error_rate", (test.len(), test.cls_dim), (test.len(), bundle.cls_dim)));
    }
    if let Some(row) = test.labels.iter().position(|&l| l < 0) {
        return Err(Error::Contract(format!("test row {row} is unlabeled")));
    }
    let mut wrong = 0.0;
    let idx: Vec<usize> = (0..test.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let logits = bundle.predict_logits(&test.features(chunk))?;
        wrong += error_from_logits(&logits, &test.labels_of(chunk))? * chunk.len() as f64;
    }
    Ok((wrong / test.len() as f64).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: usize,
    pub method: Method,
    pub seed: u64,
    pub best_error: f64,
    pub steps: u64,
    /// Labeled subset used, for pairing checks; not written to CSV.
    #[serde(skip)]
    pub paired: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("budget,method,seed,best_error,steps\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.budget, r.method, r.seed, r.best_error, r.steps).unwrap();
        }
        out
    }

    /// Mean best error over seeds for one cell.
    pub fn mean_error(&self, budget: usize, method: Method) -> Option<f64> {
        let errs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.budget == budget && r.method == method)
            .map(|r| r.best_error)
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Trains a fresh model for every `(budget, method, seed)` cell. For a
/// given `(budget, seed)` every method sees the same labeled subset, and
/// `seed` replaces `config.seed` for that cell. Rows come back ordered by
/// budget (as given), method (as given), seed (as given).
pub fn run_sweep(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    budgets: &[usize],
    methods: &[Method],
    seeds: &[u64],
    config: &RunConfig,
    jobs: usize,
) -> Result<SweepResult> {
    config.validate()?;
    let mut cells = Vec::new();
    for &budget in budgets {
        for &method in methods {
            for &seed in seeds {
                cells.push((budget, method, seed));
            }
        }
    }
    let run_cell = |&(budget, method, seed): &(usize, Method, u64)| -> Result<SweepRow> {
        let cfg = RunConfig { seed, ..config.clone() };
        let paired = select_labeled(train, budget, seed)?.paired;
        let (_, report) = fit(&cfg, method, train, test, budget)?;
        Ok(SweepRow {
            budget,
            method,
            seed,
            best_error: report.best_error,
            steps: report.steps_run,
            paired,
        })
    };
    let rows: Result<Vec<SweepRow>> = if jobs <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    };
    Ok(SweepResult { rows: rows? })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedFeatures {
    /// `n×k` component scores of the centered data.
    pub scores: Tensor2,
    /// `k×d`, one unit-norm loading vector per row.
    pub loadings: Tensor2,
    /// Fraction of total variance captured by each component, descending.
    pub explained_variance_ratio: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Principal components by full symmetric eigendecomposition of the
/// covariance. Each loading's largest-magnitude coordinate is positive.
pub fn pca_project(features: &Tensor2, k: usize) -> Result<ProjectedFeatures> {
    let (n, d) = features.shape();
    if k == 0 || k > d {
        return Err(Error::Parameter(format!("pca: k = {k} must lie in [1, {d}]")));
    }
    if n < k {
        return Err(Error::Parameter(format!("pca: {n} rows cannot give {k} components")));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(features.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |r, c| features.get(r, c) - mean[c]);
    let denom = (n.max(2) - 1) as f64;
    let cov = (centered.transpose() * &centered) / denom;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut loadings = Tensor2::zeros(k, d);
    let mut ratios = Vec::with_capacity(k);
    for (i, &j) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(j);
        let pivot = (0..d)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..d {
            loadings.set(i, c, sign * col[c]);
        }
        ratios.push(if total > 0.0 { eig.eigenvalues[j].max(0.0) / total } else { 0.0 });
    }

    let mut scores = Tensor2::zeros(n, k);
    for r in 0..n {
        for i in 0..k {
            let s: f64 = (0..d).map(|c| centered[(r, c)] * loadings.get(i, c)).sum();
            scores.set(r, i, s);
        }
    }
    Ok(ProjectedFeatures {
        scores,
        loadings,
        explained_variance_ratio: ratios,
        mean,
    })
}

/// Content-head penultimate activations, labels and a 5-component PCA of
/// the activations, as CSV `label,f0..f{H-1},p0..p4`.
pub fn export_features(bundle: &ComponentBundle, ds: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<ProjectedFeatures> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut rows = Vec::new();
    let mut width = 0;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let f = bundle.content_features(&ds.features(chunk))?;
        width = f.cols();
        rows.extend_from_slice(f.data());
    }
    let features = Tensor2::from_vec(ds.len(), width, rows)?;
    let pca = pca_project(&features, 5.min(width))?;

    let mut out = String::from("label");
    for j in 0..width {
        write!(out, ",f{j}").unwrap();
    }
    for j in 0..pca.scores.cols() {
        write!(out, ",p{j}").unwrap();
    }
    out.push('\n');
    for r in 0..ds.len() {
        write!(out, "{}", ds.labels[r]).unwrap();
        for v in features.row(r).iter().chain(pca.scores.row(r)) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(pca)
}
