//! Per-video density clustering of single-camera frames into pseudo identities.

mod dbscan;
mod pool;

pub use dbscan::{dbscan, Assignment};
pub use pool::{pseudo_label_epoch, PoolMember, PseudoLabelConfig, PseudoLabeledPool, VideoReport};
