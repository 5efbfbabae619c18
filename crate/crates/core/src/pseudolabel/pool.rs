use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dbscan::{dbscan, Assignment};
use crate::data::{PersonSample, SingleCamCorpus};
use crate::encoder::Mlp;
use crate::error::{Error, Result};
use crate::losses::mean_centroid;
use crate::numeric::Embedding;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoLabelConfig {
    /// Cosine-distance neighborhood radius.
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        Self { eps: 0.8, min_pts: 4 }
    }
}

impl PseudoLabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || self.min_pts == 0 {
            return Err(Error::InvalidConfig(format!("clustering needs eps > 0 and min_pts >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// A clustered frame with the momentum embedding it was clustered under.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMember<T> {
    pub sample: PersonSample<T>,
    pub embedding: Embedding<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VideoReport {
    pub video_id: usize,
    pub frames: usize,
    pub clusters: usize,
    pub noise: usize,
}

/// Pseudo-labeled single-camera frames for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledPool<T> {
    clusters: BTreeMap<usize, Vec<PoolMember<T>>>,
    centroids: BTreeMap<usize, Embedding<T>>,
    noise_count: usize,
    reports: Vec<VideoReport>,
}

impl<T: Scalar> PseudoLabeledPool<T> {
    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.clusters.keys().copied()
    }

    pub fn members(&self, label: usize) -> &[PoolMember<T>] {
        self.clusters.get(&label).map_or(&[], Vec::as_slice)
    }

    pub fn clusters(&self) -> impl Iterator<Item = (usize, &[PoolMember<T>])> {
        self.clusters.iter().map(|(&l, m)| (l, m.as_slice()))
    }

    pub fn centroid(&self, label: usize) -> Option<&Embedding<T>> {
        self.centroids.get(&label)
    }

    pub fn centroids(&self) -> impl Iterator<Item = (usize, &Embedding<T>)> {
        self.centroids.iter().map(|(&l, c)| (l, c))
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn num_images(&self) -> usize {
        self.clusters.values().map(Vec::len).sum()
    }

    pub fn noise_count(&self) -> usize {
        self.noise_count
    }

    /// Per processed video, in draw order.
    pub fn reports(&self) -> &[VideoReport] {
        &self.reports
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// One `{sample_id, pseudo_label, video_id}` line per pooled frame.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        for (label, members) in &self.clusters {
            for m in members {
                serde_json::to_writer(
                    &mut out,
                    &serde_json::json!({
                        "sample_id": m.sample.sample_id,
                        "pseudo_label": label,
                        "video_id": m.sample.video_id,
                    }),
                )?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Cluster randomly drawn videos until at least `limit` frames carry pseudo labels.
///
/// Videos are drawn without replacement; once all have been drawn the order is
/// reshuffled. Noise frames are dropped and do not count toward the limit.
pub fn pseudo_label_epoch<T: Scalar>(
    corpus: &SingleCamCorpus<T>,
    momentum: &Mlp<T>,
    cfg: &PseudoLabelConfig,
    limit: usize,
    rng: &mut Rng,
) -> Result<PseudoLabeledPool<T>> {
    cfg.validate()?;
    let videos = corpus.videos();
    if videos.is_empty() {
        return Err(Error::InvalidConfig("single-camera corpus has no videos".into()));
    }
    if limit == 0 {
        return Err(Error::InvalidConfig("pseudo-label budget must be positive".into()));
    }
    let eps = T::lit(cfg.eps);
    let mut pool = PseudoLabeledPool {
        clusters: BTreeMap::new(),
        centroids: BTreeMap::new(),
        noise_count: 0,
        reports: Vec::new(),
    };
    let mut order: Vec<usize> = Vec::new();
    let mut counter = 0;
    let mut pass_count = 0;
    while counter < limit {
        if order.is_empty() {
            if !pool.reports.is_empty() && pass_count == 0 {
                return Err(Error::BudgetUnreachable { limit, videos: videos.len() });
            }
            pass_count = 0;
            order = (0..videos.len()).collect();
            order.shuffle(rng);
            order.reverse();
        }
        let video = &videos[order.pop().unwrap()];
        let embeddings: Vec<Embedding<T>> =
            video.frames.iter().map(|f| momentum.embed(&f.features)).collect::<Result<_>>()?;
        let assignment = dbscan(&embeddings, eps, cfg.min_pts);

        let mut local: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut noise = 0;
        for (i, a) in assignment.iter().enumerate() {
            match a {
                Assignment::Cluster(c) => local.entry(*c).or_default().push(i),
                Assignment::Noise => noise += 1,
            }
        }
        pool.reports.push(VideoReport {
            video_id: video.video_id,
            frames: video.frames.len(),
            clusters: local.len(),
            noise,
        });
        pool.noise_count += noise;
        for frames in local.into_values() {
            let label = pool.clusters.len();
            let members: Vec<&Embedding<T>> = frames.iter().map(|&i| &embeddings[i]).collect();
            pool.centroids.insert(label, mean_centroid(&members, format!("s{label}"))?);
            counter += frames.len();
            pass_count += frames.len();
            pool.clusters.insert(
                label,
                frames
                    .iter()
                    .map(|&i| PoolMember { sample: video.frames[i].clone(), embedding: embeddings[i].clone() })
                    .collect(),
            );
        }
    }
    Ok(pool)
}
