use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::params::{LayerParams, ParamSet};
use crate::error::{Error, Result};
use crate::numeric::{normalize, Embedding};
use crate::rng::Rng;
use crate::scalar::Scalar;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Nonlinearity applied after every layer except the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Feed-forward encoder whose output is projected onto the unit sphere.
///
/// Every mutation of the parameters assigns a new stamp; caches remember the
/// stamp they were produced under so a backward pass against modified weights
/// is caught.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    params: ParamSet<T>,
    activation: Activation,
    stamp: u64,
}

/// Everything backprop needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input to each layer; entry 0 is the raw feature vector.
    inputs: Vec<Vec<T>>,
    /// Pre-normalization output of the last layer.
    raw: Vec<T>,
    norm: T,
    stamp: u64,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn raw_output(&self) -> &[T] {
        &self.raw
    }
}

impl<T: Scalar> Mlp<T> {
    /// Glorot-uniform weights, zero biases. `dims` lists every width from input to output.
    pub fn init(dims: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("encoder widths must be >= 2 positive values, got {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut l = LayerParams::zeros(fan_in, fan_out);
                for x in &mut l.weight {
                    *x = T::lit(rng.random_range(-bound..bound));
                }
                l
            })
            .collect();
        Self::from_params(ParamSet { layers }, activation)
    }

    pub fn from_params(params: ParamSet<T>, activation: Activation) -> Result<Self> {
        if params.layers.is_empty() {
            return Err(Error::ShapeMismatch("encoder needs at least one layer".into()));
        }
        params.validate()?;
        Ok(Self { params, activation, stamp: fresh_stamp() })
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    /// Mutable access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        self.stamp = fresh_stamp();
        &mut self.params
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.params.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.params.layers.last().unwrap().out_dim
    }

    pub fn forward(&self, features: &[T]) -> Result<(Embedding<T>, ForwardCache<T>)> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: features.len() });
        }
        let n_layers = self.params.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut x = features.to_vec();
        for (li, layer) in self.params.layers.iter().enumerate() {
            let hidden = li + 1 < n_layers;
            let y: Vec<T> = (0..layer.out_dim)
                .map(|o| {
                    let z = crate::numeric::dot(layer.row(o), &x) + layer.bias[o];
                    if hidden {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            inputs.push(std::mem::replace(&mut x, y));
        }
        let emb = normalize(&x)?;
        let norm = crate::numeric::norm(&x);
        Ok((emb, ForwardCache { inputs, raw: x, norm, stamp: self.stamp }))
    }

    pub fn embed(&self, features: &[T]) -> Result<Embedding<T>> {
        self.forward(features).map(|(e, _)| e)
    }

    /// Exact gradients of a scalar loss given its gradient with respect to the
    /// unit-norm output.
    pub fn backward(&self, cache: &ForwardCache<T>, d_embedding: &[T]) -> Result<ParamSet<T>> {
        if cache.stamp != self.stamp {
            return Err(Error::StaleCache);
        }
        if d_embedding.len() != self.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), got: d_embedding.len() });
        }
        // d/dv of u = v/|v| is (I - u u^T)/|v|
        let inv = T::one() / cache.norm;
        let u: Vec<T> = cache.raw.iter().map(|&v| v * inv).collect();
        let along = crate::numeric::dot(&u, d_embedding);
        let mut delta: Vec<T> = d_embedding.iter().zip(&u).map(|(&g, &ui)| (g - ui * along) * inv).collect();

        let mut grads = ParamSet::zeros_like(&self.params);
        for li in (0..self.params.layers.len()).rev() {
            let layer = &self.params.layers[li];
            let input = &cache.inputs[li];
            let g = &mut grads.layers[li];
            for o in 0..layer.out_dim {
                let d = delta[o];
                g.bias[o] = d;
                for (gw, &xi) in g.weight[o * layer.in_dim..(o + 1) * layer.in_dim].iter_mut().zip(input) {
                    *gw = d * xi;
                }
            }
            if li > 0 {
                let mut prev = vec![T::zero(); layer.in_dim];
                for (o, &d) in delta.iter().enumerate() {
                    for (p, &w) in prev.iter_mut().zip(layer.row(o)) {
                        *p += w * d;
                    }
                }
                // cache.inputs[li] is the activation output of layer li - 1
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= self.activation.derivative_from_output(a);
                }
                delta = prev;
            }
        }
        Ok(grads)
    }
}
