#![allow(dead_code)]

pub mod tables;

use rand::Rng;
use semifit::kernel::{ParamId, ParamStore, RngState, Tape, Tensor2, Var};
use semifit::nets::ArchConfig;
use semifit::Result;

/// Step of the plain central difference used for single primitives.
pub const FD_STEP: f64 = 1e-5;
/// Step of the five-point stencil used for composites, where a 1e-5 step lets
/// forward round-off (about `eps·|L|/h`) reach the 1e-6 tolerance.
pub const FD_STEP_WIDE: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub enum Stencil {
    /// `(L(x+h) − L(x−h)) / 2h`.
    Central(f64),
    /// Fourth-order central difference over `x ± h, x ± 2h`.
    FivePoint(f64),
}
/// Denominator floor for the relative error. Central differences carry an
/// absolute round-off of roughly `eps·|L|/h ≈ 1e-11·|L|`, which would read as
/// a large relative error on components near zero.
pub const REL_FLOOR: f64 = 1e-4;

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub max_rel: f64,
    pub probes: usize,
    /// Probes whose perturbations flipped a leaky-ReLU input sign.
    pub kink_skips: usize,
}

impl FdReport {
    pub fn merge(self, other: FdReport) -> FdReport {
        FdReport {
            max_rel: self.max_rel.max(other.max_rel),
            probes: self.probes + other.probes,
            kink_skips: self.kink_skips + other.kink_skips,
        }
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares backward-pass gradients of `loss` against finite differences
/// (five-point stencil; see [`check_gradients_with`]).
///
/// `loss` must be deterministic for a fixed store (replay any dropout rng
/// inside it). At most `max_coords` coordinates per parameter are probed,
/// chosen with `seed`; `None` probes every coordinate.
pub fn check_gradients<F>(store: &mut ParamStore, params: &[ParamId], max_coords: Option<usize>, seed: u64, loss: F) -> FdReport
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    check_gradients_with(Stencil::FivePoint(FD_STEP_WIDE), store, params, max_coords, seed, loss)
}

pub fn check_gradients_with<F>(
    stencil: Stencil,
    store: &mut ParamStore,
    params: &[ParamId],
    max_coords: Option<usize>,
    seed: u64,
    loss: F,
) -> FdReport
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let analytic: Vec<Tensor2> = {
        let mut tape = Tape::with_trainable(store, |id| params.contains(&id));
        let l = loss(&mut tape).expect("forward");
        tape.backward(l).expect("backward");
        params
            .iter()
            .map(|&id| tape.grad(id).cloned().unwrap_or_else(|| Tensor2::zeros(store.get(id).rows(), store.get(id).cols())))
            .collect()
    };
    let eval = |store: &ParamStore| -> (f64, Vec<bool>) {
        let mut tape = Tape::inference(store);
        let l = loss(&mut tape).expect("forward");
        (tape.scalar(l), tape.activation_signs())
    };

    let mut rng = RngState::new(seed, 0xfd);
    let mut report = FdReport::default();
    for (&id, grad) in params.iter().zip(&analytic) {
        let n = store.get(id).len();
        let coords: Vec<usize> = match max_coords {
            Some(m) if m < n => (0..m).map(|_| rng.inner().random_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        for j in coords {
            let orig = store.get(id).data()[j];
            let mut at = |delta: f64| {
                store.get_mut(id).data_mut()[j] = orig + delta;
                eval(store)
            };
            let (h, wide) = match stencil {
                Stencil::Central(h) => (h, false),
                Stencil::FivePoint(h) => (h, true),
            };
            let (lp, sp) = at(h);
            let (lm, sm) = at(-h);
            let (outer, kink) = if wide {
                let (lp2, sp2) = at(2.0 * h);
                let (lm2, sm2) = at(-2.0 * h);
                (lp2 - lm2, sp2 != sp || sm2 != sm)
            } else {
                (0.0, false)
            };
            store.get_mut(id).data_mut()[j] = orig;
            if sp != sm || kink {
                report.kink_skips += 1;
                continue;
            }
            let numeric = if wide {
                (8.0 * (lp - lm) - outer) / (12.0 * h)
            } else {
                (lp - lm) / (2.0 * h)
            };
            report.max_rel = report.max_rel.max(rel_err(grad.data()[j], numeric));
            report.probes += 1;
        }
    }
    report
}

pub fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut RngState) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.inner().random_range(-scale..scale)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

/// Reduces any `b×m` output to a scalar through a fixed random projection
/// and a sigmoid cross-entropy.
pub fn scalarize(tape: &mut Tape<'_>, out: Var, proj: &Tensor2) -> Result<Var> {
    let w = tape.input(proj.clone())?;
    let b = tape.input(Tensor2::zeros(1, 1))?;
    let z = tape.linear(out, w, b)?;
    tape.sigmoid_bce(z, 1.0)
}

/// Small widths with the same topology as the full preset.
pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        encoder_width: 24,
        content_hidden: 16,
        style_dim: 100,
        decoder_width: 20,
        disc_content_widths: vec![12, 12],
        disc_style_widths: vec![6, 12],
        disc_cls_widths: vec![8, 6, 4],
        ..ArchConfig::full()
    }
}

pub fn small_task() -> semifit::store::SyntheticData {
    semifit::store::generate_synthetic(&semifit::store::SyntheticSpec {
        classes: 4,
        cls_dim: 16,
        nuisance_dim: 4,
        n_train: 400,
        n_test: 100,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
}

/// Tiny widths, small batches, short run with frequent evaluation.
pub fn small_config(total_steps: u64) -> semifit::config::RunConfig {
    let mut cfg = semifit::config::RunConfig::default();
    cfg.arch = tiny_arch();
    cfg.schedule.total_steps = total_steps;
    cfg.schedule.batch_unsupervised = 64;
    cfg.schedule.batch_supervised = 16;
    cfg.schedule.eval_every = 10;
    cfg.optimizer.lr = 1e-3;
    cfg.disc_optimizer.lr = 1e-3;
    cfg
}

/// A random, valid dataset with unlabeled rows, odd shapes and metadata.
pub fn random_dataset(rng: &mut RngState) -> semifit::store::EmbeddingDataset {
    use semifit::store::{EmbeddingDataset, Split, UNLABELED};
    let r = rng.inner();
    let cls_dim = r.random_range(1..40);
    let k = r.random_range(1..12);
    let n = r.random_range(1..60);
    let labels: Vec<i32> = (0..n)
        .map(|_| if r.random_bool(0.2) { UNLABELED } else { r.random_range(0..k as i32) })
        .collect();
    let embeddings: Vec<f32> = (0..n * cls_dim)
        .map(|_| match r.random_range(0..10) {
            0 => 0.0,
            1 => -0.0,
            2 => f32::MIN_POSITIVE / 3.0,
            3 => f32::MAX,
            _ => r.random_range(-1e4f32..1e4),
        })
        .collect();
    let split = if r.random_bool(0.5) { Split::Train } else { Split::Test };
    let mut ds = EmbeddingDataset::new(cls_dim, k, split, labels, embeddings).unwrap();
    for i in 0..r.random_range(0..4) {
        let value: String = (0..r.random_range(0..12)).map(|_| r.random_range(' '..='~')).collect();
        ds.set_meta(format!("key-{i}-ü"), value);
    }
    ds
}
