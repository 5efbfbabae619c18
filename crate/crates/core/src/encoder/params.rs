use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weight matrix (row-major, `out_dim x in_dim`) and bias of one affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weight: vec![T::zero(); in_dim * out_dim], bias: vec![T::zero(); out_dim] }
    }

    pub fn row(&self, o: usize) -> &[T] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    fn well_formed(&self) -> bool {
        self.weight.len() == self.in_dim * self.out_dim && self.bias.len() == self.out_dim
    }
}

/// An ordered stack of layer parameters. Encoder weights, gradients and
/// optimizer moments all share this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros_like(other: &Self) -> Self {
        Self { layers: other.layers.iter().map(|l| LayerParams::zeros(l.in_dim, l.out_dim)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if !l.well_formed() {
                return Err(Error::ShapeMismatch(format!("layer {i} buffers do not match {}x{}", l.out_dim, l.in_dim)));
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.in_dim,
                    i - 1,
                    self.layers[i - 1].out_dim
                )));
            }
        }
        if self.iter().any(|x| !x.is_finite()) {
            return Err(Error::ShapeMismatch("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    pub fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{what}: parameter shapes differ")))
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All scalars, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.iter().copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} flattened parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        for (p, &v) in self.iter_mut().zip(flat) {
            *p = v;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}
