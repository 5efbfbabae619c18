//! Datasets, synthetic generation, augmentation and batch sampling.

mod augment;
mod io;
mod sample;
mod sampler;
mod synth;

pub use augment::{augment, AugmentConfig};
pub use io::{
    read_samples, read_samples_from_path, write_samples, write_samples_to_path, DatasetHeader, DATASET_FORMAT,
    DATASET_VERSION,
};
pub use sample::{MultiCamDataset, PersonSample, SingleCamCorpus, Source, Video};
pub use sampler::{camera_diverse_pick, compose_batch, BatchSizes, MiniBatch, MultiPick, SinglePick};
pub use synth::{synth_generate, GeneratorConfig, SyntheticData};
