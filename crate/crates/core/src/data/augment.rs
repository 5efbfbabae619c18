use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Vector-space stand-in for image augmentation: additive Gaussian noise
/// followed by random coordinate dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub sigma: f64,
    pub p_drop: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { sigma: 0.05, p_drop: 0.1 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || !(0.0..=1.0).contains(&self.p_drop) {
            return Err(Error::InvalidConfig(format!(
                "augmentation needs sigma >= 0 and p_drop in [0, 1], got {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn augment<T: Scalar>(features: &[T], cfg: &AugmentConfig, rng: &mut Rng) -> Vec<T> {
    features
        .iter()
        .map(|&x| {
            let noisy = if cfg.sigma > 0.0 {
                x + T::lit(cfg.sigma * rng.sample::<f64, _>(StandardNormal))
            } else {
                x
            };
            let dropped = cfg.p_drop > 0.0 && rng.random::<f64>() < cfg.p_drop;
            if dropped {
                T::zero()
            } else {
                noisy
            }
        })
        .collect()
}
