//! Loss system: supervised cross-entropy on paired rows, and for unpaired
//! rows a cosine reconstruction term plus three adversarial divergence
//! surrogates (content vs. one-hot prior, style vs. standard normal, prior
//! decodes vs. real `[CLS]` rows).
//!
//! Each `*_pass` function builds its own tape with exactly the parameter
//! groups it may train, so gradient partitioning between generator and
//! discriminators is structural rather than a convention.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Gradients, RngState, Tape, Tensor2, Var};
use crate::nets::{ComponentBundle, Disc, Group};
use crate::optimizer::AdamW;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub lambda_y: f64,
    pub lambda_yhat: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_c: 1.0,
            lambda_s: 1.0,
            lambda_y: 1.0,
            lambda_yhat: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        LossWeights {
            lambda_c: 0.0,
            lambda_s: 0.0,
            lambda_y: 0.0,
            lambda_yhat: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_c, self.lambda_s, self.lambda_y, self.lambda_yhat];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be finite and non-negative: {all:?}")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        [self.lambda_c, self.lambda_s, self.lambda_y, self.lambda_yhat]
            .iter()
            .all(|&w| w == 0.0)
    }
}

/// Source of "real" samples for a discriminator.
#[derive(Clone, Debug)]
pub enum PriorSampler {
    /// Uniform over the `K` one-hot vertices of the simplex.
    Categorical { classes: usize },
    /// `N(0, I)` of the given width.
    Gaussian { dim: usize },
    /// Rows drawn uniformly with replacement from a fixed matrix.
    Empirical { rows: Arc<Tensor2> },
}

impl PriorSampler {
    pub fn width(&self) -> usize {
        match self {
            PriorSampler::Categorical { classes } => *classes,
            PriorSampler::Gaussian { dim } => *dim,
            PriorSampler::Empirical { rows } => rows.cols(),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut RngState) -> Tensor2 {
        let rng = rng.inner();
        match self {
            PriorSampler::Categorical { classes } => {
                let mut out = Tensor2::zeros(n, *classes);
                for r in 0..n {
                    let k = rng.random_range(0..*classes);
                    out.set(r, k, 1.0);
                }
                out
            }
            PriorSampler::Gaussian { dim } => {
                let data = (0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                Tensor2::from_vec(n, *dim, data).expect("sized above")
            }
            PriorSampler::Empirical { rows } => {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..rows.rows())).collect();
                rows.select_rows(&idx)
            }
        }
    }
}

/// Fixed priors for content and style.
#[derive(Clone, Debug)]
pub struct Priors {
    pub content: PriorSampler,
    pub style: PriorSampler,
}

/// One batch of prior samples, shared by the discriminator and generator
/// halves of an unsupervised step.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorDraw {
    pub content: Tensor2,
    pub style: Tensor2,
}

impl Priors {
    pub fn for_bundle(bundle: &ComponentBundle) -> Self {
        Priors {
            content: PriorSampler::Categorical {
                classes: bundle.num_classes,
            },
            style: PriorSampler::Gaussian {
                dim: bundle.style_dim(),
            },
        }
    }

    pub fn draw(&self, n: usize, rng: &mut RngState) -> PriorDraw {
        PriorDraw {
            content: self.content.sample(n, rng),
            style: self.style.sample(n, rng),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub recon: f64,
    pub adv_c: f64,
    pub adv_s: f64,
    pub adv_y: f64,
    pub disc_c: f64,
    pub disc_s: f64,
    pub disc_y: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Range and finiteness checks run after every training step.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.ce,
            self.recon,
            self.adv_c,
            self.adv_s,
            self.adv_y,
            self.disc_c,
            self.disc_s,
            self.disc_y,
            self.total,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "loss" });
        }
        let non_negative = [self.ce, self.adv_c, self.adv_s, self.adv_y, self.disc_c, self.disc_s, self.disc_y];
        if non_negative.iter().any(|&v| v < 0.0) || !(0.0..=2.0).contains(&self.recon) {
            return Err(Error::Contract(format!("loss outside its range: {self:?}")));
        }
        Ok(())
    }
}

/// Converts dataset labels, rejecting unlabeled (`-1`) rows.
pub fn paired_labels(labels: &[i32]) -> Result<Vec<usize>> {
    labels
        .iter()
        .enumerate()
        .map(|(row, &l)| {
            usize::try_from(l).map_err(|_| Error::Contract(format!("row {row} of a paired batch is unlabeled")))
        })
        .collect()
}

/// Cross-entropy of the content head on a paired batch.
pub fn supervised_loss(
    bundle: &ComponentBundle,
    tape: &mut Tape<'_>,
    y: &Tensor2,
    labels: &[i32],
    rng: &mut RngState,
) -> Result<(Var, LossBreakdown)> {
    let labels = paired_labels(labels)?;
    let yv = tape.input(y.clone())?;
    let h = bundle.encoder.forward(tape, yv, true, rng)?;
    let logits = bundle.content.forward(tape, h, true, rng)?;
    let ce = tape.softmax_cross_entropy(logits, &labels)?;
    let value = tape.scalar(ce);
    Ok((
        ce,
        LossBreakdown {
            ce: value,
            total: value,
            ..Default::default()
        },
    ))
}

/// `½·[BCE(D(real), 1) + BCE(D(fake), 0)]`. Both inputs are detached, so only
/// the discriminator's own parameters can receive gradient.
pub fn discriminator_loss(
    bundle: &ComponentBundle,
    tape: &mut Tape<'_>,
    which: Disc,
    real: Var,
    fake: Var,
) -> Result<Var> {
    let (rw, fw) = (tape.value(real).cols(), tape.value(fake).cols());
    if rw != fw {
        return Err(Error::dim("discriminator_loss", tape.value(real).shape(), tape.value(fake).shape()));
    }
    let real = tape.detach(real)?;
    let fake = tape.detach(fake)?;
    let lr = bundle.discriminate_on(tape, which, real)?;
    let lf = bundle.discriminate_on(tape, which, fake)?;
    let br = tape.sigmoid_bce(lr, 1.0)?;
    let bf = tape.sigmoid_bce(lf, 0.0)?;
    tape.weighted_sum(&[(br, 0.5), (bf, 0.5)])
}

/// Non-saturating generator objective `BCE(D(fake), 1)`.
pub fn generator_adversarial_loss(bundle: &ComponentBundle, tape: &mut Tape<'_>, which: Disc, fake: Var) -> Result<Var> {
    let logits = bundle.discriminate_on(tape, which, fake)?;
    tape.sigmoid_bce(logits, 1.0)
}

/// Generator half of an unsupervised step. Returns the weighted total.
pub fn unsupervised_losses(
    bundle: &ComponentBundle,
    tape: &mut Tape<'_>,
    y: &Tensor2,
    draw: &PriorDraw,
    weights: &LossWeights,
    rng: &mut RngState,
) -> Result<(Var, LossBreakdown)> {
    if y.rows() == 0 {
        return Err(Error::Contract("unsupervised step on an empty batch".into()));
    }
    let yv = tape.input(y.clone())?;
    let (logits, style) = bundle.encode_on(tape, yv, true, rng)?;
    let content = tape.softmax(logits)?;
    let y_hat = bundle.decode_on(tape, content, style, true, rng)?;
    let recon = tape.cosine_loss(yv, y_hat)?;

    let adv_c = generator_adversarial_loss(bundle, tape, Disc::Content, content)?;
    let adv_s = generator_adversarial_loss(bundle, tape, Disc::Style, style)?;

    let pc = tape.input(draw.content.clone())?;
    let ps = tape.input(draw.style.clone())?;
    let y_prior = bundle.decode_on(tape, pc, ps, true, rng)?;
    let adv_y = generator_adversarial_loss(bundle, tape, Disc::Cls, y_prior)?;

    let total = tape.weighted_sum(&[
        (adv_c, weights.lambda_c),
        (adv_s, weights.lambda_s),
        (adv_y, weights.lambda_y),
        (recon, weights.lambda_yhat),
    ])?;
    let breakdown = LossBreakdown {
        recon: tape.scalar(recon),
        adv_c: tape.scalar(adv_c),
        adv_s: tape.scalar(adv_s),
        adv_y: tape.scalar(adv_y),
        total: tape.scalar(total),
        ..Default::default()
    };
    Ok((total, breakdown))
}

/// Discriminator losses on one batch: content (one-hot prior vs. softmaxed
/// predictions), style (`N(0, I)` vs. style outputs), `[CLS]` (data rows vs.
/// decodes of prior samples). Returns their sum and the three values.
pub fn discriminator_losses(
    bundle: &ComponentBundle,
    tape: &mut Tape<'_>,
    y: &Tensor2,
    draw: &PriorDraw,
    rng: &mut RngState,
) -> Result<(Var, [f64; 3])> {
    if y.rows() == 0 {
        return Err(Error::Contract("discriminator step on an empty batch".into()));
    }
    let yv = tape.input(y.clone())?;
    let (logits, style) = bundle.encode_on(tape, yv, true, rng)?;
    let content = tape.softmax(logits)?;
    let pc = tape.input(draw.content.clone())?;
    let ps = tape.input(draw.style.clone())?;
    let y_prior = bundle.decode_on(tape, pc, ps, true, rng)?;

    let dc = discriminator_loss(bundle, tape, Disc::Content, pc, content)?;
    let ds = discriminator_loss(bundle, tape, Disc::Style, ps, style)?;
    let dy = discriminator_loss(bundle, tape, Disc::Cls, yv, y_prior)?;
    let total = tape.weighted_sum(&[(dc, 1.0), (ds, 1.0), (dy, 1.0)])?;
    Ok((total, [tape.scalar(dc), tape.scalar(ds), tape.scalar(dy)]))
}

/// Forward + backward of the supervised loss; only the shared encoder and
/// content head are trainable.
pub fn supervised_pass(
    bundle: &ComponentBundle,
    y: &Tensor2,
    labels: &[i32],
    rng: &mut RngState,
) -> Result<(Gradients, LossBreakdown)> {
    let mut tape = bundle.tape(&Group::SUPERVISED);
    let (loss, breakdown) = supervised_loss(bundle, &mut tape, y, labels, rng)?;
    tape.backward(loss)?;
    Ok((tape.into_gradients(), breakdown))
}

/// Forward + backward of the generator objective; discriminators frozen.
pub fn generator_pass(
    bundle: &ComponentBundle,
    y: &Tensor2,
    draw: &PriorDraw,
    weights: &LossWeights,
    rng: &mut RngState,
) -> Result<(Gradients, LossBreakdown)> {
    let mut tape = bundle.tape(&Group::COMPONENTS);
    let (loss, breakdown) = unsupervised_losses(bundle, &mut tape, y, draw, weights, rng)?;
    tape.backward(loss)?;
    Ok((tape.into_gradients(), breakdown))
}

/// Forward + backward of the discriminator objective; components frozen.
pub fn discriminator_pass(
    bundle: &ComponentBundle,
    y: &Tensor2,
    draw: &PriorDraw,
    rng: &mut RngState,
) -> Result<(Gradients, [f64; 3])> {
    let mut tape = bundle.tape(&Group::DISCRIMINATORS);
    let (loss, values) = discriminator_losses(bundle, &mut tape, y, draw, rng)?;
    tape.backward(loss)?;
    Ok((tape.into_gradients(), values))
}

/// One update of all three discriminators.
pub fn discriminator_step(
    bundle: &mut ComponentBundle,
    opt: &mut AdamW,
    y: &Tensor2,
    draw: &PriorDraw,
    rng: &mut RngState,
    total_steps: u64,
) -> Result<[f64; 3]> {
    let (grads, values) = discriminator_pass(bundle, y, draw, rng)?;
    let params = bundle.params_in(&Group::DISCRIMINATORS);
    opt.step(&mut bundle.store, &grads, &params, total_steps)?;
    Ok(values)
}
