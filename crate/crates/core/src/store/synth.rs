//! Gaussian-cluster stand-in for foundation-model embeddings.
//!
//! Each row is `mean[label] + noise + B·z`, where `B` spans a nuisance
//! subspace shared by all classes. Scales are expected norms: `noise_scale`
//! is spread over all `cls_dim` coordinates and `nuisance_scale` over the
//! `nuisance_dim` subspace directions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{stream, RngState};
use crate::store::{EmbeddingDataset, Split};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub cls_dim: usize,
    /// Norm of every class mean.
    pub mean_scale: f64,
    /// Expected norm of the isotropic within-class noise.
    pub noise_scale: f64,
    pub nuisance_dim: usize,
    /// Expected norm of the nuisance component.
    pub nuisance_scale: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 10,
            cls_dim: 64,
            mean_scale: 4.0,
            noise_scale: 1.0,
            nuisance_dim: 8,
            nuisance_scale: 4.0,
            n_train: 6000,
            n_test: 1000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.classes == 0 || self.cls_dim == 0 {
            return bad("classes and cls_dim must be positive".into());
        }
        if self.n_train < self.classes || self.n_test == 0 {
            return bad(format!("need at least one train row per class and one test row ({} / {})", self.n_train, self.n_test));
        }
        if self.nuisance_dim > self.cls_dim {
            return bad(format!("nuisance_dim {} exceeds cls_dim {}", self.nuisance_dim, self.cls_dim));
        }
        if !(self.noise_scale > 0.0) || !(self.mean_scale >= 0.0) || !(self.nuisance_scale >= 0.0) {
            return bad("noise_scale must be positive, other scales non-negative".into());
        }
        if ![self.mean_scale, self.noise_scale, self.nuisance_scale].iter().all(|s| s.is_finite()) {
            return bad("scales must be finite".into());
        }
        Ok(())
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("source-model".into(), "synthetic".into()),
            ("dataset-name".into(), format!("synthetic-k{}-d{}", self.classes, self.cls_dim)),
            ("mean-scale".into(), self.mean_scale.to_string()),
            ("noise-scale".into(), self.noise_scale.to_string()),
            ("nuisance-dim".into(), self.nuisance_dim.to_string()),
            ("nuisance-scale".into(), self.nuisance_scale.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub train: EmbeddingDataset,
    pub test: EmbeddingDataset,
    /// Test error of a full-label linear probe fitted on `train`.
    pub probe_error: f64,
}

fn gaussian(rng: &mut RngState) -> f64 {
    rng.inner().sample(StandardNormal)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (k, d, r) = (spec.classes, spec.cls_dim, spec.nuisance_dim);
    let mut rng = RngState::new(spec.seed, stream::SYNTHETIC);

    let mut means = Vec::with_capacity(k);
    for _ in 0..k {
        let v = DVector::from_fn(d, |_, _| gaussian(&mut rng));
        means.push(v.normalize() * spec.mean_scale);
    }
    if spec.mean_scale > 0.0 {
        for a in 0..k {
            for b in a + 1..k {
                if means[a] == means[b] {
                    return Err(Error::Contract(format!("class means {a} and {b} coincide")));
                }
            }
        }
    }

    let basis = if r > 0 {
        DMatrix::from_fn(d, r, |_, _| gaussian(&mut rng)).qr().q()
    } else {
        DMatrix::zeros(d, 0)
    };

    let noise_sd = spec.noise_scale / (d as f64).sqrt();
    let nuisance_sd = if r > 0 { spec.nuisance_scale / (r as f64).sqrt() } else { 0.0 };
    let mut make = |n: usize, split: Split| -> Result<EmbeddingDataset> {
        let mut labels = Vec::with_capacity(n);
        let mut embeddings = Vec::with_capacity(n * d);
        for i in 0..n {
            let label = i % k;
            let z = DVector::from_fn(r, |_, _| nuisance_sd * gaussian(&mut rng));
            let nuisance = &basis * z;
            for j in 0..d {
                let v = means[label][j] + noise_sd * gaussian(&mut rng) + nuisance[j];
                embeddings.push(v as f32);
            }
            labels.push(label as i32);
        }
        let mut ds = EmbeddingDataset::new(d, k, split, labels, embeddings)?;
        ds.metadata = spec.metadata();
        Ok(ds)
    };
    let train = make(spec.n_train, Split::Train)?;
    let test = make(spec.n_test, Split::Test)?;
    let probe_error = linear_probe_error(&train, &test)?;
    Ok(SyntheticData {
        train,
        test,
        probe_error,
    })
}

/// Test error of a shared-covariance Gaussian (LDA) classifier fitted on
/// every labeled training row; a closed-form linear probe.
pub fn linear_probe_error(train: &EmbeddingDataset, test: &EmbeddingDataset) -> Result<f64> {
    if train.cls_dim != test.cls_dim || train.num_classes != test.num_classes {
        return Err(Error::Contract(format!(
            "probe datasets disagree: {}d/{}k vs {}d/{}k",
            train.cls_dim, train.num_classes, test.cls_dim, test.num_classes
        )));
    }
    let (d, k) = (train.cls_dim, train.num_classes);
    let counts = train.class_counts();
    let n: usize = counts.iter().sum();
    if n <= k {
        return Err(Error::Contract("probe needs more labeled rows than classes".into()));
    }
    let row = |ds: &EmbeddingDataset, i: usize| DVector::from_iterator(d, ds.row(i).iter().map(|&v| v as f64));

    let mut means = vec![DVector::<f64>::zeros(d); k];
    for i in 0..train.len() {
        if train.labels[i] >= 0 {
            means[train.labels[i] as usize] += row(train, i);
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            *m /= c as f64;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..train.len() {
        if train.labels[i] >= 0 {
            let centered = row(train, i) - &means[train.labels[i] as usize];
            cov.syger(1.0, &centered, &centered, 1.0);
        }
    }
    cov /= (n - k) as f64;
    let ridge = 1e-6 * cov.trace() / d as f64 + 1e-12;
    for j in 0..d {
        cov[(j, j)] += ridge;
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Degenerate { op: "linear_probe", row: 0 })?;

    let weights: Vec<Option<(DVector<f64>, f64)>> = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| {
            (c > 0).then(|| {
                let w = chol.solve(m);
                let b = -0.5 * m.dot(&w) + (c as f64 / n as f64).ln();
                (w, b)
            })
        })
        .collect();

    let mut wrong = 0usize;
    let mut total = 0usize;
    for i in 0..test.len() {
        let label = test.labels[i];
        if label < 0 {
            continue;
        }
        let x = row(test, i);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (c, wb) in weights.iter().enumerate() {
            if let Some((w, b)) = wb {
                let s = x.dot(w) + b;
                if s > best.0 {
                    best = (s, c);
                }
            }
        }
        total += 1;
        wrong += usize::from(best.1 != label as usize);
    }
    if total == 0 {
        return Err(Error::Contract("probe test split has no labeled rows".into()));
    }
    Ok(wrong as f64 / total as f64)
}
