//! Synthetic re-identification data with hidden ground truth.
//!
//! Every identity owns a latent unit prototype. A camera (or a video, for
//! single-camera data) owns a random affine "style" map; an observation is
//! `normalize(style(prototype) + noise)`. The target domain draws new identities
//! and new styles, so a model evaluated there has to generalize across both.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sample::{MultiCamDataset, PersonSample, SingleCamCorpus, Source, Video};
use crate::error::{Error, Result};
use crate::numeric::normalize;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    /// Raw feature dimension.
    pub dim: usize,
    /// Identity appearance lives in a random subspace of this dimension; the
    /// remaining directions carry only camera style and noise. `None` uses all of `dim`.
    pub identity_dim: Option<usize>,
    pub train_identities: usize,
    pub train_cameras: usize,
    /// Images per (identity, camera) pair in the training domain.
    pub images_per_camera: usize,
    pub single_videos: usize,
    pub identities_per_video: usize,
    pub frames_per_identity: usize,
    pub target_identities: usize,
    pub target_cameras: usize,
    pub target_images_per_camera: usize,
    /// Per-image noise scale for multi-camera observations.
    pub sigma_cam: f64,
    /// Per-frame noise scale for single-camera observations.
    pub sigma_frame: f64,
    /// Strength of the linear part of the per-camera style maps.
    pub domain_shift: f64,
    /// Norm scale of the additive per-camera colour cast.
    pub style_offset: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            identity_dim: None,
            train_identities: 60,
            train_cameras: 4,
            images_per_camera: 3,
            single_videos: 30,
            identities_per_video: 4,
            frames_per_identity: 16,
            target_identities: 40,
            target_cameras: 4,
            target_images_per_camera: 3,
            sigma_cam: 0.3,
            sigma_frame: 0.07,
            domain_shift: 0.7,
            style_offset: 0.1,
        }
    }
}

impl GeneratorConfig {
    pub fn identity_dim(&self) -> usize {
        self.identity_dim.unwrap_or(self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("identity_dim", self.identity_dim()),
            ("train_identities", self.train_identities),
            ("train_cameras", self.train_cameras),
            ("images_per_camera", self.images_per_camera),
            ("single_videos", self.single_videos),
            ("identities_per_video", self.identities_per_video),
            ("frames_per_identity", self.frames_per_identity),
            ("target_identities", self.target_identities),
            ("target_cameras", self.target_cameras),
            ("target_images_per_camera", self.target_images_per_camera),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("generator.{name} must be positive")));
        }
        if self.identity_dim() > self.dim {
            return Err(Error::InvalidConfig("generator.identity_dim cannot exceed generator.dim".into()));
        }
        if self.identities_per_video > self.identity_dim() {
            return Err(Error::InvalidConfig(
                "generator.identities_per_video cannot exceed generator.identity_dim (they form a simplex in the identity subspace)".into(),
            ));
        }
        if self.train_cameras * self.images_per_camera < 2 || self.target_cameras * self.target_images_per_camera < 2 {
            return Err(Error::InvalidConfig("every multi-camera identity needs at least 2 samples".into()));
        }
        for (name, v) in [
            ("sigma_cam", self.sigma_cam),
            ("sigma_frame", self.sigma_frame),
            ("domain_shift", self.domain_shift),
            ("style_offset", self.style_offset),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("generator.{name} must be a finite non-negative number")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData<T> {
    pub train: MultiCamDataset<T>,
    pub corpus: SingleCamCorpus<T>,
    pub target: MultiCamDataset<T>,
}

struct StyleMap {
    dim: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl StyleMap {
    /// `x -> (I + s G / sqrt(D)) x + o b / sqrt(D)` with standard normal `G`, `b`.
    fn draw(dim: usize, shift: f64, offset: f64, rng: &mut Rng) -> Self {
        let scale = shift / (dim as f64).sqrt();
        let offset_scale = offset / (dim as f64).sqrt();
        let mut matrix = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let g: f64 = rng.sample(StandardNormal);
                matrix[r * dim + c] = scale * g + if r == c { 1.0 } else { 0.0 };
            }
        }
        let offset = (0..dim).map(|_| offset_scale * rng.sample::<f64, _>(StandardNormal)).collect();
        Self { dim, matrix, offset }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| {
                let row = &self.matrix[r * self.dim..(r + 1) * self.dim];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset[r]
            })
            .collect()
    }
}

fn unit_gaussian(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = normalize(&z) {
            return u.into_vec();
        }
    }
}

/// Orthonormal basis of the identity subspace, stored as `k` vectors of length `D`.
struct IdentitySpace {
    basis: Vec<Vec<f64>>,
}

impl IdentitySpace {
    fn draw(dim: usize, k: usize, rng: &mut Rng) -> Self {
        Self { basis: orthonormal(dim, k, rng) }
    }

    fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis[0].len()];
        for (c, b) in coords.iter().zip(&self.basis) {
            out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
        }
        out
    }

    /// A random unit prototype inside the subspace.
    fn prototype(&self, rng: &mut Rng) -> Vec<f64> {
        self.embed(&unit_gaussian(self.basis.len(), rng))
    }

    /// `n` maximally distinct unit prototypes inside the subspace: a randomly
    /// oriented regular simplex, pairwise cosine `-1/(n-1)`.
    fn distinct_prototypes(&self, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        let axes = orthonormal(self.basis.len(), n, rng);
        if n == 1 {
            return vec![self.embed(&axes[0])];
        }
        let k = self.basis.len();
        let mean: Vec<f64> = (0..k).map(|j| axes.iter().map(|a| a[j]).sum::<f64>() / n as f64).collect();
        axes.iter()
            .map(|a| {
                let centered: Vec<f64> = a.iter().zip(&mean).map(|(x, m)| x - m).collect();
                self.embed(normalize(&centered).expect("simplex vertex is non-zero").as_slice())
            })
            .collect()
    }
}

/// `n` random orthonormal vectors in `dim` dimensions (Gram-Schmidt).
fn orthonormal(dim: usize, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let mut v = unit_gaussian(dim, rng);
        for b in &out {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        if let Ok(u) = normalize(&v) {
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
                out.push(u.into_vec());
            }
        }
    }
    out
}

/// Isotropic noise with expected norm close to `sigma`.
fn observe<T: Scalar>(style: &StyleMap, proto: &[f64], sigma: f64, rng: &mut Rng) -> Result<Vec<T>> {
    let per_coord = sigma / (style.dim as f64).sqrt();
    let mut v = style.apply(proto);
    if per_coord > 0.0 {
        for x in &mut v {
            *x += per_coord * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(normalize(&v)?.iter().map(|&x| T::lit(x)).collect())
}

struct Ids {
    sample: u64,
    hidden: u64,
}

fn multi_domain<T: Scalar>(
    identities: usize,
    cameras: usize,
    per_camera: usize,
    cfg: &GeneratorConfig,
    space: &IdentitySpace,
    ids: &mut Ids,
    rng: &mut Rng,
) -> Result<MultiCamDataset<T>> {
    let protos: Vec<Vec<f64>> = (0..identities).map(|_| space.prototype(rng)).collect();
    let styles: Vec<StyleMap> = (0..cameras).map(|_| StyleMap::draw(cfg.dim, cfg.domain_shift, cfg.style_offset, rng)).collect();
    let mut samples = Vec::with_capacity(identities * cameras * per_camera);
    for (label, proto) in protos.iter().enumerate() {
        for (camera, style) in styles.iter().enumerate() {
            for _ in 0..per_camera {
                samples.push(PersonSample {
                    sample_id: ids.sample,
                    features: observe(style, proto, cfg.sigma_cam, rng)?,
                    identity: Some(label),
                    camera: Some(camera),
                    video_id: None,
                    source: Source::Multi,
                    hidden_identity: ids.hidden + label as u64,
                });
                ids.sample += 1;
            }
        }
    }
    ids.hidden += identities as u64;
    MultiCamDataset::new(samples)
}

/// Generate the training domain, the single-camera corpus and a held-out target domain.
/// The same config and seed always produce identical data.
pub fn synth_generate<T: Scalar>(cfg: &GeneratorConfig, rng: &mut Rng) -> Result<SyntheticData<T>> {
    cfg.validate()?;
    let mut ids = Ids { sample: 0, hidden: 0 };
    let space = IdentitySpace::draw(cfg.dim, cfg.identity_dim(), rng);
    let train =
        multi_domain(cfg.train_identities, cfg.train_cameras, cfg.images_per_camera, cfg, &space, &mut ids, rng)?;

    let mut videos = Vec::with_capacity(cfg.single_videos);
    for video_id in 0..cfg.single_videos {
        let style = StyleMap::draw(cfg.dim, cfg.domain_shift, cfg.style_offset, rng);
        // people sharing a video are drawn clearly distinct from one another
        let protos = space.distinct_prototypes(cfg.identities_per_video, rng);
        let mut frames = Vec::with_capacity(cfg.identities_per_video * cfg.frames_per_identity);
        for (k, proto) in protos.iter().enumerate() {
            for _ in 0..cfg.frames_per_identity {
                frames.push(PersonSample {
                    sample_id: ids.sample,
                    features: observe(&style, proto, cfg.sigma_frame, rng)?,
                    identity: None,
                    camera: None,
                    video_id: Some(video_id),
                    source: Source::Single,
                    hidden_identity: ids.hidden + k as u64,
                });
                ids.sample += 1;
            }
        }
        ids.hidden += cfg.identities_per_video as u64;
        videos.push(Video { video_id, frames });
    }
    let corpus = SingleCamCorpus::new(videos)?;

    let target = multi_domain(
        cfg.target_identities,
        cfg.target_cameras,
        cfg.target_images_per_camera,
        cfg,
        &space,
        &mut ids,
        rng,
    )?;
    Ok(SyntheticData { train, corpus, target })
}
