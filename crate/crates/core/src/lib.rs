//! Joint training of person re-identification embeddings from labeled
//! multi-camera data and pseudo-labeled single-camera videos, with a small MLP
//! encoder, an EMA momentum encoder and four contrastive loss terms.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the command-line tool uses.

pub mod data;
pub mod encoder;
mod error;
pub mod eval;
pub mod gradcheck;
pub mod losses;
pub mod numeric;
pub mod pseudolabel;
pub mod rng;
mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use numeric::Embedding;
pub use rng::{Rng, SeedTree};
pub use scalar::Scalar;

pub type Embedding64 = numeric::Embedding<f64>;
pub type Mlp64 = encoder::Mlp<f64>;
pub type PersonSample64 = data::PersonSample<f64>;
pub type MultiCamDataset64 = data::MultiCamDataset<f64>;
pub type SingleCamCorpus64 = data::SingleCamCorpus<f64>;
pub type TrainState64 = train::TrainState<f64>;
pub type Checkpoint64 = train::Checkpoint<f64>;

pub type Embedding32 = numeric::Embedding<f32>;
pub type Mlp32 = encoder::Mlp<f32>;
