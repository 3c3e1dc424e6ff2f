//! The alternating training loop: a supervised warm start, then a repeating
//! pattern of supervised steps on paired rows and unsupervised steps on the
//! whole (label-masked) training set.

mod checkpoint;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader, CheckpointState};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluator::error_rate;
use crate::kernel::{stream, RngState, Tensor2};
use crate::nets::{ComponentBundle, Group};
use crate::objectives::{discriminator_pass, generator_pass, supervised_pass, LossBreakdown, LossWeights, PriorDraw, Priors};
use crate::optimizer::AdamW;
use crate::store::{select_labeled, BatchMode, Batcher, EmbeddingDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSchedule {
    pub warmstart_supervised_steps: u64,
    /// Supervised steps per unsupervised step after the warm start.
    pub supervised_per_unsupervised: u64,
    pub total_steps: u64,
    pub batch_supervised: usize,
    pub batch_unsupervised: usize,
    /// Evaluate on the test split every this many steps (and at step 0).
    pub eval_every: u64,
    /// Stop after this many evaluations without a new best; 0 disables.
    pub patience: u64,
    /// Within an unsupervised step, update discriminators before the
    /// generator.
    pub discriminator_first: bool,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        TrainingSchedule {
            warmstart_supervised_steps: 20,
            supervised_per_unsupervised: 2,
            total_steps: 2000,
            batch_supervised: 32,
            batch_unsupervised: 512,
            eval_every: 50,
            patience: 20,
            discriminator_first: true,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.supervised_per_unsupervised == 0 {
            return Err(Error::Config("schedule.supervised_per_unsupervised must be at least 1".into()));
        }
        if self.batch_supervised == 0 || self.batch_unsupervised == 0 {
            return Err(Error::Config("schedule batch sizes must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("schedule.eval_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Supervised,
    Unsupervised,
}

/// Phase of 1-based `step`: supervised through the warm start, then
/// `supervised_per_unsupervised` supervised steps followed by one
/// unsupervised step, repeating.
pub fn plan(step: u64, schedule: &TrainingSchedule) -> Phase {
    let warm = schedule.warmstart_supervised_steps;
    if step <= warm {
        return Phase::Supervised;
    }
    let period = schedule.supervised_per_unsupervised + 1;
    if (step - warm).is_multiple_of(period) {
        Phase::Unsupervised
    } else {
        Phase::Supervised
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Supervised steps only.
    #[serde(rename = "supervised")]
    Sup,
    #[serde(rename = "semi-supervised")]
    Semi,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sup => "supervised",
            Method::Semi => "semi-supervised",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" | "supervised" => Ok(Method::Sup),
            "semi" | "semi-supervised" => Ok(Method::Semi),
            other => Err(Error::Config(format!("unknown method `{other}` (expected sup or semi)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub phase: Phase,
    pub losses: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalLog {
    pub step: u64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub budget: usize,
    pub seed: u64,
    pub total_steps: u64,
    pub steps_run: u64,
    pub stopped_early: bool,
    pub best_error: f64,
    pub best_step: u64,
    pub evals: Vec<EvalLog>,
    pub steps: Vec<StepLog>,
}

/// One supervised update of the shared encoder and content head.
pub fn supervised_step(
    bundle: &mut ComponentBundle,
    opt: &mut AdamW,
    y: &Tensor2,
    labels: &[i32],
    rng: &mut RngState,
    total_steps: u64,
) -> Result<LossBreakdown> {
    let (grads, losses) = supervised_pass(bundle, y, labels, rng)?;
    let params = bundle.params_in(&Group::SUPERVISED);
    opt.step(&mut bundle.store, &grads, &params, total_steps)?;
    Ok(losses)
}

/// One unsupervised update: the discriminators and the generator
/// (encoder, heads, decoder) each take one step on the same batch and
/// prior draw.
#[allow(clippy::too_many_arguments)]
pub fn unsupervised_step(
    bundle: &mut ComponentBundle,
    opt: &mut AdamW,
    disc_opt: &mut AdamW,
    y: &Tensor2,
    draw: &PriorDraw,
    weights: &LossWeights,
    rng: &mut RngState,
    total_steps: u64,
    discriminator_first: bool,
) -> Result<LossBreakdown> {
    let disc = |bundle: &mut ComponentBundle, rng: &mut RngState, disc_opt: &mut AdamW| -> Result<[f64; 3]> {
        let (grads, values) = discriminator_pass(bundle, y, draw, rng)?;
        let params = bundle.params_in(&Group::DISCRIMINATORS);
        disc_opt.step(&mut bundle.store, &grads, &params, total_steps)?;
        Ok(values)
    };
    let generator = |bundle: &mut ComponentBundle, rng: &mut RngState, opt: &mut AdamW| -> Result<LossBreakdown> {
        let (grads, losses) = generator_pass(bundle, y, draw, weights, rng)?;
        let params = bundle.params_in(&Group::COMPONENTS);
        opt.step(&mut bundle.store, &grads, &params, total_steps)?;
        Ok(losses)
    };
    let (d, mut losses) = if discriminator_first {
        let d = disc(bundle, rng, disc_opt)?;
        (d, generator(bundle, rng, opt)?)
    } else {
        let g = generator(bundle, rng, opt)?;
        (disc(bundle, rng, disc_opt)?, g)
    };
    [losses.disc_c, losses.disc_s, losses.disc_y] = d;
    Ok(losses)
}

/// Stateful training run; can be checkpointed and resumed between steps.
pub struct Trainer<'d> {
    config: RunConfig,
    method: Method,
    budget: usize,
    train: &'d EmbeddingDataset,
    test: &'d EmbeddingDataset,
    paired: Vec<usize>,
    bundle: ComponentBundle,
    opt: AdamW,
    disc_opt: AdamW,
    priors: Priors,
    paired_batches: Batcher,
    unpaired_batches: Batcher,
    dropout_rng: RngState,
    prior_rng: RngState,
    step: u64,
    evals_since_best: u64,
    report: TrainReport,
}

impl<'d> Trainer<'d> {
    /// Fresh model; selects the labeled subset with `config.seed` and
    /// evaluates the untrained head as step 0.
    pub fn new(
        config: &RunConfig,
        method: Method,
        train: &'d EmbeddingDataset,
        test: &'d EmbeddingDataset,
        budget: usize,
    ) -> Result<Self> {
        config.validate()?;
        check_splits(train, test)?;
        let seed = config.seed;
        let paired = select_labeled(train, budget, seed)?.paired;
        let bundle = ComponentBundle::build(train.cls_dim, train.num_classes, &config.arch, seed)?;
        let sched = &config.schedule;
        let mut trainer = Trainer {
            priors: Priors::for_bundle(&bundle),
            paired_batches: Batcher::new(paired.len(), sched.batch_supervised, BatchMode::Cycle, seed, stream::PAIRED_BATCHES)?,
            unpaired_batches: Batcher::new(train.len(), sched.batch_unsupervised, BatchMode::Epoch, seed, stream::UNPAIRED_BATCHES)?,
            opt: AdamW::new(config.optimizer.clone())?,
            disc_opt: AdamW::new(config.disc_optimizer.clone())?,
            dropout_rng: RngState::new(seed, stream::DROPOUT),
            prior_rng: RngState::new(seed, stream::PRIOR),
            report: TrainReport {
                method,
                budget,
                seed,
                total_steps: sched.total_steps,
                steps_run: 0,
                stopped_early: false,
                best_error: 1.0,
                best_step: 0,
                evals: Vec::new(),
                steps: Vec::new(),
            },
            config: config.clone(),
            method,
            budget,
            train,
            test,
            paired,
            bundle,
            step: 0,
            evals_since_best: 0,
        };
        trainer.evaluate()?;
        Ok(trainer)
    }

    pub fn bundle(&self) -> &ComponentBundle {
        &self.bundle
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn paired_indices(&self) -> &[usize] {
        &self.paired
    }

    pub fn into_parts(self) -> (ComponentBundle, TrainReport) {
        (self.bundle, self.report)
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.schedule.total_steps || self.report.stopped_early
    }

    fn evaluate(&mut self) -> Result<()> {
        let error = error_rate(&self.bundle, self.test)?;
        self.report.evals.push(EvalLog { step: self.step, error });
        if self.report.evals.len() == 1 || error < self.report.best_error {
            self.report.best_error = error;
            self.report.best_step = self.step;
            self.evals_since_best = 0;
        } else {
            self.evals_since_best += 1;
            let patience = self.config.schedule.patience;
            if patience > 0 && self.evals_since_best >= patience {
                self.report.stopped_early = true;
            }
        }
        Ok(())
    }

    /// Runs the next step. Returns `false` once the run is over.
    pub fn advance(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        let step = self.step + 1;
        let total = self.config.schedule.total_steps;
        let phase = match self.method {
            Method::Sup => Phase::Supervised,
            Method::Semi => plan(step, &self.config.schedule),
        };
        let outcome = match phase {
            Phase::Supervised => {
                let batch = self.paired_batches.next_batch();
                let rows: Vec<usize> = batch.indices.iter().map(|&i| self.paired[i]).collect();
                let y = self.train.features(&rows);
                let labels = self.train.labels_of(&rows);
                supervised_step(&mut self.bundle, &mut self.opt, &y, &labels, &mut self.dropout_rng, total)
            }
            Phase::Unsupervised => {
                let batch = self.unpaired_batches.next_batch();
                let y = self.train.features(&batch.indices);
                let draw = self.priors.draw(y.rows(), &mut self.prior_rng);
                unsupervised_step(
                    &mut self.bundle,
                    &mut self.opt,
                    &mut self.disc_opt,
                    &y,
                    &draw,
                    &self.config.loss,
                    &mut self.dropout_rng,
                    total,
                    self.config.schedule.discriminator_first,
                )
            }
        };
        let losses = outcome.and_then(|l| l.validate().map(|_| l)).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Divergence {
                step,
                source: Box::new(e),
            },
            other => other,
        })?;

        self.step = step;
        self.report.steps_run = step;
        self.report.steps.push(StepLog { step, phase, losses });
        if step.is_multiple_of(self.config.schedule.eval_every) || step == total {
            self.evaluate()?;
        }
        Ok(true)
    }

    pub fn run(&mut self) -> Result<()> {
        while self.advance()? {}
        Ok(())
    }

    /// Runs until `step` (or the end of the run, if sooner).
    pub fn run_until(&mut self, step: u64) -> Result<()> {
        while self.step < step && self.advance()? {}
        Ok(())
    }
}

fn check_splits(train: &EmbeddingDataset, test: &EmbeddingDataset) -> Result<()> {
    if train.cls_dim != test.cls_dim || train.num_classes != test.num_classes {
        return Err(Error::Contract(format!(
            "train ({} dims, {} classes) and test ({} dims, {} classes) disagree",
            train.cls_dim, train.num_classes, test.cls_dim, test.num_classes
        )));
    }
    Ok(())
}

/// Trains a fresh model to completion.
pub fn fit(
    config: &RunConfig,
    method: Method,
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    budget: usize,
) -> Result<(ComponentBundle, TrainReport)> {
    let mut trainer = Trainer::new(config, method, train, test, budget)?;
    trainer.run()?;
    Ok(trainer.into_parts())
}
