use std::fmt;

use crate::data::Source;
use crate::error::{Error, Result};
use crate::numeric::Embedding;
use crate::scalar::Scalar;

/// A label or pseudo label, tagged with its source so the two namespaces never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BatchLabel {
    pub source: Source,
    pub id: usize,
}

impl BatchLabel {
    pub fn multi(id: usize) -> Self {
        Self { source: Source::Multi, id }
    }

    pub fn single(id: usize) -> Self {
        Self { source: Source::Single, id }
    }
}

impl fmt::Display for BatchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source {
            Source::Multi => write!(f, "m{}", self.id),
            Source::Single => write!(f, "s{}", self.id),
        }
    }
}

/// Encoder outputs `f` (augmented inputs) and momentum outputs `m` (original
/// inputs) for one mini-batch, multi-camera samples first.
#[derive(Debug, Clone, Copy)]
pub struct BatchView<'a, T> {
    pub f: &'a [Embedding<T>],
    pub m: &'a [Embedding<T>],
    pub labels: &'a [BatchLabel],
    pub cameras: &'a [Option<usize>],
}

impl<'a, T: Scalar> BatchView<'a, T> {
    pub fn new(
        f: &'a [Embedding<T>],
        m: &'a [Embedding<T>],
        labels: &'a [BatchLabel],
        cameras: &'a [Option<usize>],
    ) -> Result<Self> {
        let n = f.len();
        if m.len() != n || labels.len() != n || cameras.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "batch view lengths differ: f {n}, m {}, labels {}, cameras {}",
                m.len(),
                labels.len(),
                cameras.len()
            )));
        }
        if let Some(first) = f.first() {
            let dim = first.dim();
            if let Some(bad) = f.iter().chain(m).find(|e| e.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
            }
        }
        let first_single = labels.iter().position(|l| l.source == Source::Single).unwrap_or(n);
        if labels[first_single..].iter().any(|l| l.source == Source::Multi) {
            return Err(Error::ShapeMismatch("multi-camera samples must precede single-camera samples".into()));
        }
        if labels[..first_single].iter().zip(cameras).any(|(_, c)| c.is_none()) {
            return Err(Error::ShapeMismatch("multi-camera samples need a camera id".into()));
        }
        Ok(Self { f, m, labels, cameras })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.f.first().map_or(0, |e| e.dim())
    }

    /// Distinct labels in order of first appearance.
    pub fn distinct_labels(&self) -> Vec<BatchLabel> {
        let mut out: Vec<BatchLabel> = Vec::new();
        for l in self.labels {
            if !out.contains(l) {
                out.push(*l);
            }
        }
        out
    }
}

/// Which single-camera samples take part in a loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    /// Single-camera samples act as anchors.
    pub single_anchors: bool,
    /// Single-camera samples (or their centroids) appear in softmax pools.
    pub single_in_pool: bool,
}

impl Scope {
    pub const ALL: Scope = Scope { single_anchors: true, single_in_pool: true };
    pub const MULTI_ONLY: Scope = Scope { single_anchors: false, single_in_pool: false };
    pub const SINGLE_AS_POOL: Scope = Scope { single_anchors: false, single_in_pool: true };

    pub(crate) fn anchor(&self, l: &BatchLabel) -> bool {
        l.source == Source::Multi || self.single_anchors
    }

    pub(crate) fn pooled(&self, l: &BatchLabel) -> bool {
        l.source == Source::Multi || self.single_in_pool
    }
}

/// Scalar loss and its gradient with respect to every `f` in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub value: T,
    pub grads: Vec<Vec<T>>,
}

impl<T: Scalar> LossOutput<T> {
    pub(crate) fn zeros(n: usize, dim: usize) -> Self {
        Self { value: T::zero(), grads: vec![vec![T::zero(); dim]; n] }
    }

    /// Divide value and gradients by the number of contributing anchors.
    pub(crate) fn averaged(mut self, count: usize) -> Self {
        if count > 0 {
            let inv = T::one() / T::lit(count as f64);
            self.value *= inv;
            for g in &mut self.grads {
                for x in g.iter_mut() {
                    *x *= inv;
                }
            }
        }
        self
    }
}

pub(crate) fn axpy<T: Scalar>(out: &mut [T], alpha: T, x: &[T]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}
