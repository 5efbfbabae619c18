//! Finite-difference check of every loss term composed with a small encoder.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoder::{Activation, Mlp, ParamSet};
use crate::error::{Error, Result};
use crate::losses::{
    augmentation_loss, build_centroids, camera_centroids_loss, centroids_loss, instance_loss, BatchLabel, BatchView,
    CentroidBank, LossConfig, LossOutput,
};
use crate::numeric::{finite_diff_grad, Embedding};
use crate::rng::{Rng, SeedTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Instance,
    Augmentation,
    Centroids,
    CameraCentroids,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Instance, LossKind::Augmentation, LossKind::Centroids, LossKind::CameraCentroids];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Instance => "instance",
            LossKind::Augmentation => "augmentation",
            LossKind::Centroids => "centroids",
            LossKind::CameraCentroids => "camera_centroids",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub batches: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    /// Labels per source; the batch holds `2 * labels_per_source * samples_per_label` samples.
    pub labels_per_source: usize,
    pub samples_per_label: usize,
    pub step: f64,
    pub threshold: f64,
    /// Coordinates where both gradients are below this are compared absolutely.
    pub floor: f64,
    /// Test hook: scale the analytic gradient of this loss by 1.01 so the check must fail.
    pub corrupt: Option<LossKind>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            batches: 20,
            input_dim: 16,
            hidden_dim: 16,
            embedding_dim: 8,
            labels_per_source: 3,
            samples_per_label: 2,
            step: 1e-5,
            threshold: 1e-4,
            floor: 1e-6,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCheck {
    pub loss: LossKind,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub threshold: f64,
    pub checks: Vec<LossCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{verdict} {:<17} max_rel_error={:.3e} (threshold {:.0e})", c.loss.name(), c.max_rel_error, self.threshold)?;
        }
        Ok(())
    }
}

/// One random batch: raw inputs, fixed momentum outputs and centroids.
struct Fixture {
    inputs: Vec<Vec<f64>>,
    m: Vec<Embedding<f64>>,
    labels: Vec<BatchLabel>,
    cameras: Vec<Option<usize>>,
    bank: CentroidBank<f64>,
}

fn gaussian(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn fixture(cfg: &GradcheckConfig, momentum: &Mlp<f64>, rng: &mut Rng) -> Result<Fixture> {
    let mut labels = Vec::new();
    let mut cameras = Vec::new();
    for label in 0..cfg.labels_per_source {
        let mut cams = [0, 1, 2, 3];
        cams.shuffle(rng);
        for k in 0..cfg.samples_per_label {
            labels.push(BatchLabel::multi(label));
            cameras.push(Some(cams[k % cams.len()]));
        }
    }
    for label in 0..cfg.labels_per_source {
        for _ in 0..cfg.samples_per_label {
            labels.push(BatchLabel::single(label));
            cameras.push(None);
        }
    }
    let inputs: Vec<Vec<f64>> = labels.iter().map(|_| gaussian(cfg.input_dim, rng)).collect();
    let m: Vec<Embedding<f64>> = inputs.iter().map(|x| momentum.embed(x)).collect::<Result<_>>()?;
    let bank = build_centroids(&m, &labels, &cameras, 0)?;
    Ok(Fixture { inputs, m, labels, cameras, bank })
}

fn evaluate(kind: LossKind, view: &BatchView<'_, f64>, bank: &CentroidBank<f64>) -> Result<LossOutput<f64>> {
    let t = LossConfig::default();
    match kind {
        LossKind::Instance => instance_loss(view, t.tau_ins_m, t.tau_ins_s),
        LossKind::Augmentation => augmentation_loss(view, t.tau_aug),
        LossKind::Centroids => centroids_loss(view, bank, t.tau_cen_m, t.tau_cen_s),
        LossKind::CameraCentroids => camera_centroids_loss(view, bank, t.tau_cc),
    }
}

/// Loss value and analytic parameter gradient of `kind` at the encoder's current weights.
fn loss_and_grad(kind: LossKind, encoder: &Mlp<f64>, fx: &Fixture) -> Result<(f64, ParamSet<f64>)> {
    let mut f = Vec::with_capacity(fx.inputs.len());
    let mut caches = Vec::with_capacity(fx.inputs.len());
    for x in &fx.inputs {
        let (e, c) = encoder.forward(x)?;
        f.push(e);
        caches.push(c);
    }
    let view = BatchView::new(&f, &fx.m, &fx.labels, &fx.cameras)?;
    let out = evaluate(kind, &view, &fx.bank)?;
    let mut grads = ParamSet::zeros_like(encoder.params());
    for (c, g) in caches.iter().zip(&out.grads) {
        grads.add_assign(&encoder.backward(c, g)?);
    }
    Ok((out.value, grads))
}

fn rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Compares analytic and central-difference gradients with respect to every
/// encoder parameter, for each loss term over `cfg.batches` random batches.
pub fn run_gradcheck(cfg: &GradcheckConfig, seed: u64) -> Result<GradcheckReport> {
    if cfg.batches == 0 || cfg.labels_per_source == 0 || cfg.samples_per_label < 2 {
        return Err(Error::InvalidConfig("gradient check needs at least one batch with two samples per label".into()));
    }
    let seeds = SeedTree::new(seed);
    let dims = [cfg.input_dim, cfg.hidden_dim, cfg.embedding_dim];
    let mut worst = [0.0_f64; 4];
    for b in 0..cfg.batches as u64 {
        let mut rng = seeds.indexed_stream("gradcheck", b);
        let encoder = Mlp::<f64>::init(&dims, Activation::Tanh, &mut rng)?;
        let momentum = Mlp::<f64>::init(&dims, Activation::Tanh, &mut rng)?;
        // non-zero biases so their gradients are exercised from a generic point
        let mut encoder = encoder;
        for l in &mut encoder.params_mut().layers {
            l.bias.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let fx = fixture(cfg, &momentum, &mut rng)?;
        let theta = encoder.params().to_flat();
        for (slot, kind) in LossKind::ALL.into_iter().enumerate() {
            let (_, grads) = loss_and_grad(kind, &encoder, &fx)?;
            let mut analytic = grads.to_flat();
            if cfg.corrupt == Some(kind) {
                analytic.iter_mut().for_each(|g| *g *= 1.01);
            }
            let mut probe = encoder.clone();
            let numeric = finite_diff_grad(
                |p: &[f64]| {
                    probe.params_mut().set_flat(p).expect("same length");
                    loss_and_grad(kind, &probe, &fx).map_or(f64::NAN, |(v, _)| v)
                },
                &theta,
                cfg.step,
            )?;
            worst[slot] = worst[slot].max(rel_error(&analytic, &numeric, cfg.floor));
        }
    }
    Ok(GradcheckReport {
        threshold: cfg.threshold,
        checks: LossKind::ALL
            .into_iter()
            .zip(worst)
            .map(|(loss, e)| LossCheck { loss, max_rel_error: e, passed: e <= cfg.threshold })
            .collect(),
    })
}
