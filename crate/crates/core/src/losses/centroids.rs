use std::collections::BTreeMap;
use std::fmt::Display;

use super::view::BatchLabel;
use crate::error::{Error, Result};
use crate::numeric::{normalize, Embedding};
use crate::scalar::Scalar;

/// Normalized mean of a group of momentum embeddings.
pub fn mean_centroid<T: Scalar>(members: &[&Embedding<T>], what: impl Display) -> Result<Embedding<T>> {
    let first = members.first().ok_or_else(|| Error::EmptyLabel(what.to_string()))?;
    let mut sum = vec![T::zero(); first.dim()];
    for m in members {
        if m.dim() != sum.len() {
            return Err(Error::DimensionMismatch { expected: sum.len(), got: m.dim() });
        }
        for (s, &x) in sum.iter_mut().zip(m.iter()) {
            *s += x;
        }
    }
    let inv = T::one() / T::lit(members.len() as f64);
    sum.iter_mut().for_each(|s| *s *= inv);
    normalize(&sum)
}

/// Label centroids and (label, camera) centroids, fixed for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidBank<T> {
    labels: BTreeMap<BatchLabel, Embedding<T>>,
    cameras: BTreeMap<(usize, usize), Embedding<T>>,
    epoch: usize,
}

impl<T: Scalar> CentroidBank<T> {
    pub fn empty(epoch: usize) -> Self {
        Self { labels: BTreeMap::new(), cameras: BTreeMap::new(), epoch }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn label(&self, label: &BatchLabel) -> Result<&Embedding<T>> {
        self.labels.get(label).ok_or_else(|| Error::UnresolvedLabel(label.to_string()))
    }

    pub fn camera(&self, label: usize, camera: usize) -> Option<&Embedding<T>> {
        self.cameras.get(&(label, camera))
    }

    /// Camera centroids of one multi-camera label, ascending by camera.
    pub fn cameras_of(&self, label: usize) -> impl Iterator<Item = (usize, &Embedding<T>)> {
        self.cameras.range((label, 0)..=(label, usize::MAX)).map(|(&(_, c), e)| (c, e))
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_camera_centroids(&self) -> usize {
        self.cameras.len()
    }

    /// Whether any label has centroids under two or more cameras.
    pub fn has_multi_view_label(&self) -> bool {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &(l, _) in self.cameras.keys() {
            *counts.entry(l).or_default() += 1;
        }
        counts.values().any(|&c| c >= 2)
    }

    pub fn insert_label(&mut self, label: BatchLabel, centroid: Embedding<T>) {
        self.labels.insert(label, centroid);
    }

    pub fn labels(&self) -> impl Iterator<Item = (&BatchLabel, &Embedding<T>)> {
        self.labels.iter()
    }
}

/// Label centroids from every labeled embedding, plus (label, camera)
/// centroids for entries that carry a camera.
pub fn build_centroids<T: Scalar>(
    embeddings: &[Embedding<T>],
    labels: &[BatchLabel],
    cameras: &[Option<usize>],
    epoch: usize,
) -> Result<CentroidBank<T>> {
    if embeddings.len() != labels.len() || labels.len() != cameras.len() {
        return Err(Error::ShapeMismatch("centroid inputs have different lengths".into()));
    }
    let mut by_label: BTreeMap<BatchLabel, Vec<&Embedding<T>>> = BTreeMap::new();
    let mut by_camera: BTreeMap<(usize, usize), Vec<&Embedding<T>>> = BTreeMap::new();
    for ((e, l), c) in embeddings.iter().zip(labels).zip(cameras) {
        by_label.entry(*l).or_default().push(e);
        if let Some(c) = c {
            by_camera.entry((l.id, *c)).or_default().push(e);
        }
    }
    let mut bank = CentroidBank::empty(epoch);
    for (l, members) in by_label {
        bank.labels.insert(l, mean_centroid(&members, l)?);
    }
    for ((l, c), members) in by_camera {
        bank.cameras.insert((l, c), mean_centroid(&members, format!("m{l}/cam{c}"))?);
    }
    Ok(bank)
}
