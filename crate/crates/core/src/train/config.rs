use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, BatchSizes};
use crate::encoder::{Activation, AdamConfig};
use crate::error::{Error, Result};
use crate::losses::{LossConfig, SingleCamUsage};
use crate::pseudolabel::PseudoLabelConfig;

/// Encoder shape. The input width comes from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { embedding_dim: 16, hidden: vec![64], activation: Activation::Tanh }
    }
}

impl ModelConfig {
    pub fn dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(self.embedding_dim);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!("model widths must be positive, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Momentum coefficient of the EMA encoder.
    pub lambda: f64,
    /// Weight of the camera-centroid term.
    pub gamma: f64,
    pub tau_ins_m: f64,
    pub tau_ins_s: f64,
    pub tau_aug: f64,
    pub tau_cen_m: f64,
    pub tau_cen_s: f64,
    pub tau_cc: f64,
    /// Draw instance-loss negatives from both sources instead of the anchor's own.
    pub cross_source_negatives: bool,
    pub epochs: usize,
    pub iterations: usize,
    pub batch: BatchSizes,
    pub use_single_cam: bool,
    /// Per-term switches for single-camera samples when `use_single_cam` is on.
    pub single_cam: SingleCamUsage,
    pub pseudo: PseudoLabelConfig,
    /// Clustered frames to collect per epoch; defaults to `single_p * single_k * iterations`.
    pub pseudo_label_budget: Option<usize>,
    pub optimizer: AdamConfig,
    pub augment: AugmentConfig,
    /// Checkpoint every this many epochs, in addition to the final one; 0 keeps only the final.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        Self {
            lambda: 0.999,
            gamma: loss.gamma,
            tau_ins_m: loss.tau_ins_m,
            tau_ins_s: loss.tau_ins_s,
            tau_aug: loss.tau_aug,
            tau_cen_m: loss.tau_cen_m,
            tau_cen_s: loss.tau_cen_s,
            tau_cc: loss.tau_cc,
            cross_source_negatives: loss.cross_source_negatives,
            epochs: 20,
            iterations: 50,
            batch: BatchSizes::default(),
            use_single_cam: true,
            single_cam: SingleCamUsage::default(),
            pseudo: PseudoLabelConfig::default(),
            pseudo_label_budget: None,
            optimizer: AdamConfig::default(),
            augment: AugmentConfig::default(),
            checkpoint_every: 5,
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            tau_ins_m: self.tau_ins_m,
            tau_ins_s: self.tau_ins_s,
            tau_aug: self.tau_aug,
            tau_cen_m: self.tau_cen_m,
            tau_cen_s: self.tau_cen_s,
            tau_cc: self.tau_cc,
            gamma: self.gamma,
            cross_source_negatives: self.cross_source_negatives,
            single_cam: self.single_cam,
        }
    }

    /// Batch sizes actually used: the single-camera half is dropped when disabled.
    pub fn effective_batch(&self) -> BatchSizes {
        if self.use_single_cam {
            self.batch
        } else {
            BatchSizes { single_p: 0, single_k: 0, ..self.batch }
        }
    }

    pub fn pseudo_limit(&self) -> usize {
        self.pseudo_label_budget.unwrap_or(self.batch.single_len() * self.iterations)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss().validate()?;
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations per epoch must be at least 1".into()));
        }
        if self.batch.multi_p == 0 || self.batch.multi_k == 0 {
            return Err(Error::InvalidConfig("the multi-camera half of the batch cannot be empty".into()));
        }
        if self.use_single_cam && self.pseudo_limit() == 0 {
            return Err(Error::InvalidConfig("pseudo-label budget must be positive".into()));
        }
        self.pseudo.validate()?;
        self.optimizer.validate()?;
        self.augment.validate()
    }
}
