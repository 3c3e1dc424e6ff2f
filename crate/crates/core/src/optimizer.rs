//! AdamW with decoupled weight decay and a linear warmup.
//!
//! Moments and the bias-correction counter are tracked per parameter, so a
//! tensor that is only touched by some step types (the style head, for
//! instance) gets a correctly bias-corrected first update whenever it
//! finally receives a gradient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Gradients, ParamId, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Fraction of the total step count spent ramping the rate up from 0.
    pub warmup_fraction: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            warmup_fraction: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("optimizer {what}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("betas must lie in (0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Learning rate at 1-based `step`: linear ramp over
/// `⌈warmup_fraction·total_steps⌉` steps, constant afterwards.
pub fn lr_at(step: u64, total_steps: u64, cfg: &AdamWConfig) -> f64 {
    let warmup = (cfg.warmup_fraction * total_steps as f64).ceil() as u64;
    if warmup == 0 || step >= warmup {
        cfg.lr
    } else {
        cfg.lr * step as f64 / warmup as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Updates applied to this parameter so far.
    pub t: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    pub slots: BTreeMap<ParamId, Moments>,
    /// Calls to [`AdamW::step`]; drives the warmup schedule.
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    pub state: OptimizerState,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AdamW {
            cfg,
            state: OptimizerState::default(),
        })
    }

    pub fn with_state(cfg: AdamWConfig, state: OptimizerState) -> Result<Self> {
        cfg.validate()?;
        Ok(AdamW { cfg, state })
    }

    /// Updates every parameter in `params` that has a gradient; parameters
    /// the loss never reached are left alone. Returns the rate used.
    ///
    /// Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, params: &[ParamId], total_steps: u64) -> Result<f64> {
        for &id in params {
            if let Some(g) = grads.get(id) {
                if g.shape() != store.get(id).shape() {
                    return Err(Error::dim("adamw_step", store.get(id).shape(), g.shape()));
                }
                if !g.is_finite() {
                    return Err(Error::NonFinite { op: "adamw_step" });
                }
            }
        }

        self.state.step += 1;
        let lr = lr_at(self.state.step, total_steps, &self.cfg);
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.cfg;
        let decay = 1.0 - lr * weight_decay;

        for &id in params {
            let Some(g) = grads.get(id) else { continue };
            let theta = store.get_mut(id).data_mut();
            let slot = self.state.slots.entry(id).or_insert_with(|| Moments {
                m: vec![0.0; theta.len()],
                v: vec![0.0; theta.len()],
                t: 0,
            });
            slot.t += 1;
            let bc1 = 1.0 - beta1.powi(slot.t as i32);
            let bc2 = 1.0 - beta2.powi(slot.t as i32);
            for (((p, &gi), m), v) in theta.iter_mut().zip(g.data()).zip(&mut slot.m).zip(&mut slot.v) {
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                *p = *p * decay - lr * update;
            }
        }
        Ok(lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Tensor2;

    fn one_param(v: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", Tensor2::scalar(v));
        (s, id)
    }

    fn grads_for(_store: &ParamStore, id: ParamId, g: f64) -> Gradients {
        let mut grads = vec![None; id.0 + 1];
        grads[id.0] = Some(Tensor2::scalar(g));
        Gradients::from_vec(grads)
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let (mut store, id) = one_param(1.0);
        let mut opt = AdamW::new(AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        })
        .unwrap();
        let g = grads_for(&store, id, 1.0);
        opt.step(&mut store, &g, &[id], 100).unwrap();
        let expected = 1.0 - 5e-5 * (1.0 / (1.0 + 1e-8));
        assert!((store.get(id).item() - expected).abs() < 1e-15);
        assert!((store.get(id).item() - 0.99995).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let (mut store, id) = one_param(0.37);
        let mut opt = AdamW::new(AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        })
        .unwrap();
        for _ in 0..10 {
            let g = grads_for(&store, id, 0.0);
            opt.step(&mut store, &g, &[id], 10).unwrap();
        }
        assert_eq!(store.get(id).item(), 0.37);
    }

    #[test]
    fn pure_decay_is_geometric_and_beta_independent() {
        for (b1, b2) in [(0.9, 0.999), (0.5, 0.9)] {
            let (mut store, id) = one_param(2.0);
            let cfg = AdamWConfig {
                lr: 1e-2,
                beta1: b1,
                beta2: b2,
                weight_decay: 0.1,
                ..Default::default()
            };
            let mut opt = AdamW::new(cfg.clone()).unwrap();
            let mut expected = 2.0;
            for _ in 0..20 {
                let g = grads_for(&store, id, 0.0);
                opt.step(&mut store, &g, &[id], 20).unwrap();
                expected *= 1.0 - cfg.lr * cfg.weight_decay;
                assert_eq!(store.get(id).item(), expected);
            }
        }
    }

    #[test]
    fn warmup_schedule() {
        let cfg = AdamWConfig::default();
        assert_eq!(lr_at(1, 1000, &cfg), cfg.lr);
        let warm = AdamWConfig {
            warmup_fraction: 0.1,
            ..Default::default()
        };
        assert!((lr_at(50, 1000, &warm) - 0.5 * warm.lr).abs() < 1e-20);
        assert_eq!(lr_at(100, 1000, &warm), warm.lr);
        assert_eq!(lr_at(731, 1000, &warm), warm.lr);
        let mut prev = 0.0;
        for s in 1..=200 {
            let lr = lr_at(s, 1000, &warm);
            assert!(lr >= prev);
            prev = lr;
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let (mut store, id) = one_param(1.0);
        let mut opt = AdamW::new(AdamWConfig::default()).unwrap();
        let grads = Gradients::from_vec(vec![Some(Tensor2::scalar(f64::NAN))]);
        let err = opt.step(&mut store, &grads, &[id], 10).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(store.get(id).item(), 1.0);
        assert_eq!(opt.state.step, 0);
    }

    #[test]
    fn config_validation() {
        assert!(AdamW::new(AdamWConfig {
            lr: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(AdamW::new(AdamWConfig {
            warmup_fraction: 1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f(θ) = ½ Σ aᵢ(θᵢ − cᵢ)², minimiser θ* = c.
        let a = [1.0, 4.0, 0.25];
        let c = [0.3, -0.2, 0.15];
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor2::zeros(1, 3));
        let mut opt = AdamW::new(AdamWConfig {
            lr: 1e-2,
            weight_decay: 0.0,
            ..Default::default()
        })
        .unwrap();
        for _ in 0..5000 {
            let th = store.get(id).data().to_vec();
            let g: Vec<f64> = (0..3).map(|i| a[i] * (th[i] - c[i])).collect();
            let grads = Gradients::from_vec(vec![Some(Tensor2::from_vec(1, 3, g).unwrap())]);
            opt.step(&mut store, &grads, &[id], 5000).unwrap();
        }
        for (t, c) in store.get(id).data().iter().zip(c) {
            assert!((t - c).abs() < 1e-6, "{t} vs {c}");
        }
    }
}
