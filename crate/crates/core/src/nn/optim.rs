use serde::{Deserialize, Serialize};

use super::{Float, Parameter};
use crate::error::{Error, Result};

/// Averaged SGD with momentum, step-wise exponential decay, L2 and a global
/// gradient-norm constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub momentum: f64,
    pub l2: f64,
    pub max_grad_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.1,
            decay_rate: 0.95,
            decay_steps: 2000,
            momentum: 0.9,
            l2: 1e-4,
            max_grad_norm: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    /// Number of updates applied so far.
    pub step: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Self {
        OptimizerState { config, step: 0 }
    }

    /// `lr · decay^⌊step / decay_steps⌋`
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        let c = &self.config;
        c.learning_rate * c.decay_rate.powi((step / c.decay_steps) as i32)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate_at(self.step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub learning_rate: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

/// Applies one update to all parameters and zeroes their gradients.
pub fn sgd_step<F: Float>(params: &mut [&mut Parameter<F>], opt: &mut OptimizerState) -> Result<StepStats> {
    let mut squared = 0.0f64;
    for p in params.iter_mut() {
        let mut sum = 0.0f64;
        for &g in p.grad_mut().iter() {
            let g = g.to_f64().unwrap_or(f64::NAN);
            sum += g * g;
        }
        if !sum.is_finite() {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
        squared += sum;
    }
    let grad_norm = squared.sqrt();
    let scale = if grad_norm > opt.config.max_grad_norm {
        F::of(opt.config.max_grad_norm / grad_norm)
    } else {
        F::one()
    };

    let lr = opt.learning_rate();
    let (lr_f, momentum, l2) = (F::of(lr), F::of(opt.config.momentum), F::of(opt.config.l2));
    let count = F::of((opt.step + 1) as f64);

    for p in params.iter_mut() {
        let decay = if p.l2_exempt { F::zero() } else { l2 };
        let grad = std::mem::take(p.grad_mut());
        let Parameter {
            value,
            velocity,
            average,
            ..
        } = &mut **p;
        ndarray::Zip::from(&mut *value)
            .and(&mut *velocity)
            .and(&mut *average)
            .and(&grad)
            .for_each(|v, m, a, &g| {
                let g = g * scale + decay * *v;
                *m = momentum * *m + lr_f * g;
                *v -= *m;
                *a += (*v - *a) / count;
            });
        let mut grad = grad;
        grad.fill(F::zero());
        *p.grad_mut() = grad;
    }
    opt.step += 1;

    Ok(StepStats {
        learning_rate: lr,
        grad_norm,
    })
}
