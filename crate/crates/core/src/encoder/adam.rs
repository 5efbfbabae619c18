use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Epochs of linear warm-up; 0 disables it.
    pub warmup_epochs: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.00035, weight_decay: 0.0005, beta1: 0.9, beta2: 0.999, eps: 1e-8, warmup_epochs: 10 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")))
        }
    }

    /// `lr * min(1, (epoch + 1) / warmup_epochs)`, epochs counted from 0.
    pub fn effective_lr(&self, epoch: usize) -> f64 {
        if self.warmup_epochs == 0 {
            return self.lr;
        }
        self.lr * ((epoch + 1) as f64 / self.warmup_epochs as f64).min(1.0)
    }
}

/// Adam moments with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub first_moment: ParamSet<T>,
    pub second_moment: ParamSet<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: AdamConfig, params: &ParamSet<T>) -> Self {
        Self {
            config,
            first_moment: ParamSet::zeros_like(params),
            second_moment: ParamSet::zeros_like(params),
            step: 0,
        }
    }

    pub fn step(&mut self, encoder: &mut Mlp<T>, grads: &ParamSet<T>, epoch: usize) -> Result<()> {
        encoder.params().ensure_same_shape(grads, "adam gradients")?;
        encoder.params().ensure_same_shape(&self.first_moment, "adam moments")?;
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let lr = T::lit(c.effective_lr(epoch));
        let wd = T::lit(c.weight_decay);
        let eps = T::lit(c.eps);
        let bias1 = T::one() - b1.powi(self.step as i32);
        let bias2 = T::one() - b2.powi(self.step as i32);

        let params = encoder.params_mut().iter_mut();
        let moments = self.first_moment.iter_mut().zip(self.second_moment.iter_mut());
        for ((p, (m, v)), &g) in params.zip(moments).zip(grads.iter()) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *p);
        }
        Ok(())
    }
}
