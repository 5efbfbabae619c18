use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Multi,
    Single,
}

/// One image analogue: a raw feature vector plus whatever annotation its source carries.
///
/// `hidden_identity` is ground truth from the generator. Training code never reads it;
/// it exists for purity diagnostics and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonSample<T> {
    pub sample_id: u64,
    pub features: Vec<T>,
    pub identity: Option<usize>,
    pub camera: Option<usize>,
    pub video_id: Option<usize>,
    pub source: Source,
    pub hidden_identity: u64,
}

impl<T: Scalar> PersonSample<T> {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    fn check(&self) -> Result<()> {
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("sample {} has non-finite features", self.sample_id)));
        }
        let ok = match self.source {
            Source::Multi => self.identity.is_some() && self.camera.is_some(),
            Source::Single => self.video_id.is_some() && self.camera.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "sample {} violates {:?}-source annotation rules",
                self.sample_id, self.source
            )))
        }
    }
}

fn check_dims<T: Scalar>(samples: &[PersonSample<T>]) -> Result<usize> {
    let dim = samples.first().map_or(0, PersonSample::dim);
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
        }
    }
    Ok(dim)
}

/// Labeled multi-camera data with dense identity and camera ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCamDataset<T> {
    samples: Vec<PersonSample<T>>,
    by_label: Vec<Vec<usize>>,
    num_cameras: usize,
    dim: usize,
}

impl<T: Scalar> MultiCamDataset<T> {
    pub fn new(samples: Vec<PersonSample<T>>) -> Result<Self> {
        let dim = check_dims(&samples)?;
        let mut num_labels = 0;
        let mut num_cameras = 0;
        for s in &samples {
            s.check()?;
            if s.source != Source::Multi {
                return Err(Error::InvalidConfig(format!("sample {} is not multi-camera", s.sample_id)));
            }
            num_labels = num_labels.max(s.identity.unwrap() + 1);
            num_cameras = num_cameras.max(s.camera.unwrap() + 1);
        }
        let mut by_label = vec![Vec::new(); num_labels];
        let mut seen_cam = vec![false; num_cameras];
        for (i, s) in samples.iter().enumerate() {
            by_label[s.identity.unwrap()].push(i);
            seen_cam[s.camera.unwrap()] = true;
        }
        if let Some(l) = by_label.iter().position(|m| m.len() < 2) {
            return Err(Error::InvalidConfig(format!(
                "identity {l} has {} samples; labels must be dense and have at least 2 samples",
                by_label[l].len()
            )));
        }
        if let Some(c) = seen_cam.iter().position(|&x| !x) {
            return Err(Error::InvalidConfig(format!("camera ids are not dense: camera {c} unused")));
        }
        Ok(Self { samples, by_label, num_cameras, dim })
    }

    pub fn samples(&self) -> &[PersonSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_labels(&self) -> usize {
        self.by_label.len()
    }

    pub fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    /// Sample indices of one identity, in dataset order.
    pub fn label_members(&self, label: usize) -> &[usize] {
        &self.by_label[label]
    }

    pub fn into_samples(self) -> Vec<PersonSample<T>> {
        self.samples
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video<T> {
    pub video_id: usize,
    pub frames: Vec<PersonSample<T>>,
}

/// Unlabeled single-camera videos. Every hidden identity lives in exactly one video.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleCamCorpus<T> {
    videos: Vec<Video<T>>,
    dim: usize,
}

impl<T: Scalar> SingleCamCorpus<T> {
    pub fn new(videos: Vec<Video<T>>) -> Result<Self> {
        let mut dim = None;
        let mut owner: BTreeMap<u64, usize> = BTreeMap::new();
        for v in &videos {
            if v.frames.is_empty() {
                return Err(Error::InvalidConfig(format!("video {} is empty", v.video_id)));
            }
            let d = check_dims(&v.frames)?;
            if *dim.get_or_insert(d) != d {
                return Err(Error::DimensionMismatch { expected: dim.unwrap(), got: d });
            }
            for f in &v.frames {
                f.check()?;
                if f.source != Source::Single || f.video_id != Some(v.video_id) {
                    return Err(Error::InvalidConfig(format!(
                        "sample {} does not belong to single-camera video {}",
                        f.sample_id, v.video_id
                    )));
                }
                if *owner.entry(f.hidden_identity).or_insert(v.video_id) != v.video_id {
                    return Err(Error::InvalidConfig(format!(
                        "hidden identity {} appears in more than one video",
                        f.hidden_identity
                    )));
                }
            }
        }
        Ok(Self { videos, dim: dim.unwrap_or(0) })
    }

    /// Group a flat list of single-camera samples by `video_id`, ordered by id.
    pub fn from_samples(samples: Vec<PersonSample<T>>) -> Result<Self> {
        let mut grouped: BTreeMap<usize, Vec<PersonSample<T>>> = BTreeMap::new();
        for s in samples {
            let vid = s.video_id.ok_or_else(|| {
                Error::InvalidConfig(format!("single-camera sample {} has no video_id", s.sample_id))
            })?;
            grouped.entry(vid).or_default().push(s);
        }
        Self::new(grouped.into_iter().map(|(video_id, frames)| Video { video_id, frames }).collect())
    }

    pub fn videos(&self) -> &[Video<T>] {
        &self.videos
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_frames(&self) -> usize {
        self.videos.iter().map(|v| v.frames.len()).sum()
    }

    pub fn samples(&self) -> impl Iterator<Item = &PersonSample<T>> {
        self.videos.iter().flat_map(|v| v.frames.iter())
    }
}
