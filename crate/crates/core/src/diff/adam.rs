use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters with a step-decay learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplier applied to the learning rate every `decay_every` steps.
    pub decay_factor: f64,
    pub decay_every: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Optional L2 coefficient added to gradients.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay_factor: 0.25,
            decay_every: 10_000,
            clip_norm: Some(5.0),
            l2: 0.0,
        }
    }
}

impl AdamConfig {
    /// Learning rate in force after `step` completed updates.
    pub fn effective_lr(&self, step: u64) -> f64 {
        let drops = if self.decay_every == 0 {
            0
        } else {
            step / self.decay_every
        };
        self.lr * self.decay_factor.powi(drops.min(i32::MAX as u64) as i32)
    }
}

/// Applies one clipped Adam update using the gradients in `store`.
///
/// Aborts before touching any value if a gradient is non-finite.
pub fn adam_step<S: Scalar>(store: &mut ParamStore<S>, cfg: &AdamConfig) -> Result<()> {
    for id in store.ids() {
        if !store.grad(id).all_finite() {
            return Err(Error::NonFiniteGradient(store.name(id).to_string()));
        }
    }
    let lr = S::lit(cfg.effective_lr(store.step));
    let (b1, b2, eps) = (S::lit(cfg.beta1), S::lit(cfg.beta2), S::lit(cfg.eps));
    let l2 = S::lit(cfg.l2);
    let clip = match cfg.clip_norm {
        Some(max) => {
            let norm = store.grad_norm();
            let max = S::lit(max);
            if norm > max {
                max / norm
            } else {
                S::one()
            }
        }
        None => S::one(),
    };
    let t = store.step + 1;
    let bc1 = S::one() - b1.powi(t as i32);
    let bc2 = S::one() - b2.powi(t as i32);

    let ParamStore {
        values,
        grads,
        first_moment,
        second_moment,
        ..
    } = store;
    for (((value, grad), m), v) in values
        .iter_mut()
        .zip(grads.iter())
        .zip(first_moment.iter_mut())
        .zip(second_moment.iter_mut())
    {
        for (((x, &g), mi), vi) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            let g = g * clip + l2 * *x;
            *mi = b1 * *mi + (S::one() - b1) * g;
            *vi = b2 * *vi + (S::one() - b2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *x = *x - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    store.step = t;
    Ok(())
}
