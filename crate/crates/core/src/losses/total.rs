use serde::{Deserialize, Serialize};

use super::centroids::CentroidBank;
use super::terms::{augmentation_loss_scoped, camera_centroids_loss, centroids_loss_scoped, instance_loss_scoped};
use super::view::{axpy, BatchView, LossOutput, Scope};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How single-camera samples enter the centroid term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidUse {
    Off,
    /// Their centroids join the softmax pool; they are never anchors.
    CentroidsOnly,
    Full,
}

/// Per-term switches for single-camera data, used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleCamUsage {
    pub instance: bool,
    pub augmentation: bool,
    pub centroids: CentroidUse,
}

impl Default for SingleCamUsage {
    fn default() -> Self {
        Self { instance: true, augmentation: true, centroids: CentroidUse::Full }
    }
}

impl SingleCamUsage {
    fn flag(on: bool) -> Scope {
        if on {
            Scope::ALL
        } else {
            Scope::MULTI_ONLY
        }
    }

    fn centroid_scope(&self) -> Scope {
        match self.centroids {
            CentroidUse::Off => Scope::MULTI_ONLY,
            CentroidUse::CentroidsOnly => Scope::SINGLE_AS_POOL,
            CentroidUse::Full => Scope::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau_ins_m: f64,
    pub tau_ins_s: f64,
    pub tau_aug: f64,
    pub tau_cen_m: f64,
    pub tau_cen_s: f64,
    pub tau_cc: f64,
    /// Weight of the camera-centroid term.
    pub gamma: f64,
    pub cross_source_negatives: bool,
    pub single_cam: SingleCamUsage,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau_ins_m: 0.1,
            tau_ins_s: 0.2,
            tau_aug: 0.1,
            tau_cen_m: 0.5,
            tau_cen_s: 0.6,
            tau_cc: 0.07,
            gamma: 0.5,
            cross_source_negatives: false,
            single_cam: SingleCamUsage::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let taus = [self.tau_ins_m, self.tau_ins_s, self.tau_aug, self.tau_cen_m, self.tau_cen_s, self.tau_cc];
        if taus.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidConfig(format!("all temperatures must be positive, got {taus:?}")));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub ins: T,
    pub aug: T,
    pub cen: T,
    pub cc: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss<T> {
    pub value: T,
    pub grads: Vec<Vec<T>>,
    pub parts: LossBreakdown<T>,
}

/// The four terms, each with its value and gradient, under one config.
pub struct LossTerms<T> {
    pub ins: LossOutput<T>,
    pub aug: LossOutput<T>,
    pub cen: LossOutput<T>,
    pub cc: Option<LossOutput<T>>,
}

fn evaluate<T: Scalar>(
    view: &BatchView<'_, T>,
    bank: &CentroidBank<T>,
    cfg: &LossConfig,
    with_cc: bool,
) -> Result<LossTerms<T>> {
    let usage = cfg.single_cam;
    Ok(LossTerms {
        ins: instance_loss_scoped(
            view,
            T::lit(cfg.tau_ins_m),
            T::lit(cfg.tau_ins_s),
            cfg.cross_source_negatives,
            SingleCamUsage::flag(usage.instance),
        )?,
        aug: augmentation_loss_scoped(view, T::lit(cfg.tau_aug), SingleCamUsage::flag(usage.augmentation))?,
        cen: centroids_loss_scoped(view, bank, T::lit(cfg.tau_cen_m), T::lit(cfg.tau_cen_s), usage.centroid_scope())?,
        cc: if with_cc { Some(camera_centroids_loss(view, bank, T::lit(cfg.tau_cc))?) } else { None },
    })
}

/// Every term evaluated separately, regardless of `gamma`.
pub fn loss_terms<T: Scalar>(view: &BatchView<'_, T>, bank: &CentroidBank<T>, cfg: &LossConfig) -> Result<LossTerms<T>> {
    evaluate(view, bank, cfg, true)
}

/// `L_ins + L_aug + L_cen + gamma * L_cc`, with the matching weighted gradient.
/// With `gamma == 0` the camera term is not evaluated at all.
pub fn total_loss<T: Scalar>(view: &BatchView<'_, T>, bank: &CentroidBank<T>, cfg: &LossConfig) -> Result<TotalLoss<T>> {
    let t = evaluate(view, bank, cfg, cfg.gamma > 0.0)?;
    Ok(combine(&t.ins, &t.aug, &t.cen, t.cc.as_ref(), T::lit(cfg.gamma)))
}

pub(crate) fn combine<T: Scalar>(
    ins: &LossOutput<T>,
    aug: &LossOutput<T>,
    cen: &LossOutput<T>,
    cc: Option<&LossOutput<T>>,
    gamma: T,
) -> TotalLoss<T> {
    let mut grads = ins.grads.clone();
    for (g, (a, c)) in grads.iter_mut().zip(aug.grads.iter().zip(&cen.grads)) {
        axpy(g, T::one(), a);
        axpy(g, T::one(), c);
    }
    let cc_value = cc.map_or(T::zero(), |cc| cc.value);
    if let Some(cc) = cc {
        for (g, c) in grads.iter_mut().zip(&cc.grads) {
            axpy(g, gamma, c);
        }
    }
    TotalLoss {
        value: ins.value + aug.value + cen.value + gamma * cc_value,
        grads,
        parts: LossBreakdown { ins: ins.value, aug: aug.value, cen: cen.value, cc: cc_value },
    }
}
