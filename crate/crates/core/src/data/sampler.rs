//! Two-source PK mini-batch composition.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sample::MultiCamDataset;
use crate::error::{Error, Result};
use crate::pseudolabel::PseudoLabeledPool;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// P labels times K samples, separately for each source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSizes {
    pub multi_p: usize,
    pub multi_k: usize,
    pub single_p: usize,
    pub single_k: usize,
}

impl Default for BatchSizes {
    fn default() -> Self {
        Self { multi_p: 8, multi_k: 4, single_p: 8, single_k: 4 }
    }
}

impl BatchSizes {
    pub fn multi_len(&self) -> usize {
        self.multi_p * self.multi_k
    }

    pub fn single_len(&self) -> usize {
        self.single_p * self.single_k
    }

    pub fn total(&self) -> usize {
        self.multi_len() + self.single_len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiPick {
    /// Index into [`MultiCamDataset::samples`].
    pub index: usize,
    pub label: usize,
    pub camera: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SinglePick {
    pub pseudo_label: usize,
    /// Position within the pseudo-label's member list.
    pub member: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub multi: Vec<MultiPick>,
    pub single: Vec<SinglePick>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.multi.len() + self.single.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pick `k` members of one identity, covering as many cameras as possible.
///
/// Cameras are visited round-robin in random order, each contributing an unused
/// sample per round. Once every sample is used, picks continue with replacement.
pub fn camera_diverse_pick<T: Scalar>(
    data: &MultiCamDataset<T>,
    label: usize,
    k: usize,
    rng: &mut Rng,
) -> Vec<MultiPick> {
    let members = data.label_members(label);
    let mut by_camera: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in members {
        by_camera.entry(data.samples()[i].camera.unwrap()).or_default().push(i);
    }
    let mut queues: Vec<(usize, Vec<usize>)> = by_camera.into_iter().collect();
    queues.shuffle(rng);
    for (_, q) in &mut queues {
        q.shuffle(rng);
    }

    let mut picks = Vec::with_capacity(k);
    let mut round = 0;
    while picks.len() < k && round < members.len() {
        for (camera, q) in &queues {
            if picks.len() == k {
                break;
            }
            if let Some(&index) = q.get(round) {
                picks.push(MultiPick { index, label, camera: *camera });
            }
        }
        round += 1;
    }
    while picks.len() < k {
        let (camera, q) = &queues[rng.random_range(0..queues.len())];
        let index = q[rng.random_range(0..q.len())];
        picks.push(MultiPick { index, label, camera: *camera });
    }
    picks
}

pub fn compose_batch<T: Scalar>(
    multi: &MultiCamDataset<T>,
    pool: Option<&PseudoLabeledPool<T>>,
    sizes: BatchSizes,
    rng: &mut Rng,
) -> Result<MiniBatch> {
    if multi.num_labels() < sizes.multi_p {
        return Err(Error::InsufficientLabels {
            source_kind: "multi-camera",
            needed: sizes.multi_p,
            available: multi.num_labels(),
        });
    }
    let mut batch = MiniBatch {
        multi: Vec::with_capacity(sizes.multi_len()),
        single: Vec::with_capacity(sizes.single_len()),
    };
    if sizes.multi_k > 0 {
        for label in index::sample(rng, multi.num_labels(), sizes.multi_p) {
            batch.multi.extend(camera_diverse_pick(multi, label, sizes.multi_k, rng));
        }
    }

    if sizes.single_p > 0 && sizes.single_k > 0 {
        let labels: Vec<usize> = pool.map(|p| p.labels().collect()).unwrap_or_default();
        if labels.len() < sizes.single_p {
            return Err(Error::InsufficientLabels {
                source_kind: "pseudo",
                needed: sizes.single_p,
                available: labels.len(),
            });
        }
        let pool = pool.unwrap();
        for li in index::sample(rng, labels.len(), sizes.single_p) {
            let label = labels[li];
            let n = pool.members(label).len();
            if n >= sizes.single_k {
                for member in index::sample(rng, n, sizes.single_k) {
                    batch.single.push(SinglePick { pseudo_label: label, member });
                }
            } else {
                for _ in 0..sizes.single_k {
                    batch.single.push(SinglePick { pseudo_label: label, member: rng.random_range(0..n) });
                }
            }
        }
    }
    Ok(batch)
}
