use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::state::TrainState;
use crate::encoder::{LayerParams, Mlp, OptimizerState, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "remix-ckpt";
pub const CHECKPOINT_VERSION: u64 = 1;

/// Everything needed to rebuild both encoders and resume the optimizer.
/// Parameters are stored flat, weights before biases, layer by layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u64,
    pub seed: u64,
    pub input_dim: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub encoder: Vec<T>,
    pub momentum: Vec<T>,
    pub optimizer: OptimizerState<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn capture(state: &TrainState<T>, model: &ModelConfig, train: &TrainConfig, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed,
            input_dim: state.encoder.input_dim(),
            model: model.clone(),
            train: train.clone(),
            epoch: state.epoch,
            encoder: state.encoder.params().to_flat(),
            momentum: state.momentum.params().to_flat(),
            optimizer: state.optimizer.clone(),
        }
    }

    fn rebuild(&self, flat: &[T]) -> Result<Mlp<T>> {
        let dims = self.model.dims(self.input_dim);
        let mut params =
            ParamSet { layers: dims.windows(2).map(|w| LayerParams::zeros(w[0], w[1])).collect() };
        params.set_flat(flat)?;
        params.ensure_same_shape(&self.optimizer.first_moment, "checkpoint optimizer state")?;
        Mlp::from_params(params, self.model.activation)
    }

    /// The encoder used for inference.
    pub fn momentum_encoder(&self) -> Result<Mlp<T>> {
        self.rebuild(&self.momentum)
    }

    pub fn encoder(&self) -> Result<Mlp<T>> {
        self.rebuild(&self.encoder)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = value.get("version").and_then(|v| v.as_u64());
        if format != CHECKPOINT_FORMAT || version != Some(CHECKPOINT_VERSION) {
            return Err(Error::VersionMismatch {
                what: "checkpoint",
                found: format!("{format:?} version {}", version.map_or("?".into(), |v| v.to_string())),
            });
        }
        let ckpt: Self = serde_json::from_value(value)?;
        ckpt.momentum_encoder()?;
        Ok(ckpt)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
