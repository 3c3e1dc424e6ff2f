//! Run configuration: one TOML document with a section per module.
//!
//! ```toml
//! seed = 0
//!
//! [arch]
//! encoder_width = 8000
//!
//! [optimizer]
//! lr = 5e-5
//!
//! [schedule]
//! total_steps = 2000
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::ArchConfig;
use crate::objectives::LossWeights;
use crate::optimizer::AdamWConfig;
use crate::trainer::TrainingSchedule;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Learnable priors are named but never parameterised by the method's
    /// description; only the fixed one-hot / standard-normal priors exist.
    pub learnable: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub arch: ArchConfig,
    /// Shared encoder, heads and decoder.
    pub optimizer: AdamWConfig,
    /// All three discriminators.
    pub disc_optimizer: AdamWConfig,
    pub loss: LossWeights,
    pub priors: PriorConfig,
    pub schedule: TrainingSchedule,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Every resolved value, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.disc_optimizer.validate()?;
        self.loss.validate()?;
        self.schedule.validate()?;
        if self.priors.learnable {
            return Err(Error::Config("learnable priors are not supported; set priors.learnable = false".into()));
        }
        let a = &self.arch;
        if !(a.slope > 0.0 && a.slope < 1.0) || !(a.disc_slope > 0.0 && a.disc_slope < 1.0) {
            return Err(Error::Config("leaky-ReLU slopes must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&a.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
