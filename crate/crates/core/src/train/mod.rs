//! The joint training loop over labeled multi-camera and pseudo-labeled single-camera data.

mod checkpoint;
mod config;
mod metrics;
mod state;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ModelConfig, TrainConfig};
pub use metrics::{moving_average, write_metrics, EpochMetrics};
pub use state::{run_epoch, train, FileObserver, TrainObserver, TrainState};
