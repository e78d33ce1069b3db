use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::Result;

/// Moments of parameters whose gradient has become exactly zero decay
/// geometrically into the subnormal range, where x86 arithmetic is ~100×
/// slower. Values below `f64::MIN_POSITIVE` are treated as zero.
#[inline]
fn flush_subnormal(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: ParamSet,
    pub second_moment: ParamSet,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state for `params` with the conventional constants (0.9, 0.999, 1e-8).
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        AdamState {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update of `params` in place from `grads`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_congruent(grads, "adam_step gradients")?;
        params.check_congruent(&self.first_moment, "adam_step state")?;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        // lr · m̂ / (√v̂ + ε) with the bias corrections folded into two scalars.
        let step_size = self.learning_rate / bc1;
        let inv_sqrt_bc2 = 1.0 / bc2.sqrt();
        let moments = self
            .first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut());
        for (((_, p), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
            let lanes = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((p, &g), (m, v)) in lanes {
                *m = flush_subnormal(b1 * *m + (1.0 - b1) * g);
                *v = flush_subnormal(b2 * *v + (1.0 - b2) * g * g);
                *p -= step_size * *m / (v.sqrt() * inv_sqrt_bc2 + eps);
            }
        }
        Ok(())
    }
}
