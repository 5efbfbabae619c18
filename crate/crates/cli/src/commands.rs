use std::fs;
use std::io::Write as _;
use std::path::Path;

use log::info;
use remix_core::data::{read_samples_from_path, synth_generate, write_samples_to_path, MultiCamDataset, SingleCamCorpus};
use remix_core::eval::{evaluate_domain, EvalReport};
use remix_core::gradcheck::{run_gradcheck, GradcheckConfig, GradcheckReport, LossKind};
use remix_core::train::{train, Checkpoint, EpochMetrics, FileObserver};
use remix_core::{Error, SeedTree};

use crate::config::RunConfig;
use crate::CliError;

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    Ok(())
}

fn read_dataset(path: &Path, what: &str) -> Result<Vec<remix_core::PersonSample64>, CliError> {
    if !path.exists() {
        return Err(CliError::Runtime(Error::InvalidConfig(format!(
            "{what} dataset {} does not exist (run `remix generate` first)",
            path.display()
        ))));
    }
    let (_, samples) = read_samples_from_path(path)?;
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub train: usize,
    pub single: usize,
    pub target: usize,
}

/// Writes the three synthetic datasets to the configured paths.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary, CliError> {
    let data = synth_generate::<f64>(&cfg.generator, &mut SeedTree::new(cfg.seed).stream("generator"))?;
    let dim = cfg.generator.dim;
    let io = &cfg.io;
    for p in [&io.train_data, &io.single_data, &io.target_data] {
        ensure_parent(p)?;
    }
    let summary = GenerateSummary {
        train: write_samples_to_path(&io.train_data, dim, data.train.samples())?,
        single: write_samples_to_path(&io.single_data, dim, data.corpus.samples())?,
        target: write_samples_to_path(&io.target_data, dim, data.target.samples())?,
    };
    println!("{:>6} multi-camera training records -> {}", summary.train, io.train_data.display());
    println!("{:>6} single-camera records          -> {}", summary.single, io.single_data.display());
    println!("{:>6} target-domain records          -> {}", summary.target, io.target_data.display());
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub metrics: Vec<EpochMetrics>,
    pub checkpoint: Checkpoint<f64>,
}

/// Trains on the configured datasets; writes the metrics log and checkpoints.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let io = &cfg.io;
    let multi = MultiCamDataset::new(read_dataset(&io.train_data, "multi-camera")?)?;
    let corpus = if cfg.train.use_single_cam {
        Some(SingleCamCorpus::from_samples(read_dataset(&io.single_data, "single-camera")?)?)
    } else {
        None
    };
    ensure_parent(&io.checkpoint)?;
    ensure_parent(&io.metrics)?;
    let seeds = SeedTree::new(cfg.seed);
    let mut observer = FileObserver::create(&io.checkpoint, &io.metrics)?;
    let state = train(&multi, corpus.as_ref(), &cfg.model, &cfg.train, &seeds, &mut observer)?;
    let checkpoint = Checkpoint::capture(&state, &cfg.model, &cfg.train, cfg.seed);
    if let Some(last) = state.metrics.last() {
        println!(
            "trained {} epochs; final loss {:.4}; checkpoint {}",
            state.epoch,
            last.loss_total,
            io.checkpoint.display()
        );
    } else {
        println!("no epochs run; initial weights saved to {}", io.checkpoint.display());
    }
    Ok(TrainSummary { metrics: state.metrics, checkpoint })
}

/// Scores the checkpoint's momentum encoder on the target domain.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport, CliError> {
    let ckpt = Checkpoint::<f64>::load(&cfg.io.checkpoint)?;
    let target = MultiCamDataset::new(read_dataset(&cfg.io.target_data, "target")?)?;
    if target.dim() != ckpt.input_dim {
        return Err(Error::DimensionMismatch { expected: ckpt.input_dim, got: target.dim() }.into());
    }
    let report = evaluate_domain(&ckpt.momentum_encoder()?, &target, cfg.io.workers)?;
    ensure_parent(&cfg.eval.report)?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    fs::write(&cfg.eval.report, format!("{text}\n")).map_err(Error::from)?;
    info!("report written to {}", cfg.eval.report.display());
    // a closed pipe (e.g. `| head`) is not an error worth failing over
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(report)
}

/// Finite-difference check of all four losses; fails with exit code 3.
pub fn cmd_gradcheck(seed: u64, corrupt: Option<LossKind>) -> Result<GradcheckReport, CliError> {
    let report = run_gradcheck(&GradcheckConfig { corrupt, ..GradcheckConfig::default() }, seed)?;
    let _ = write!(std::io::stdout(), "{report}");
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::CheckFailed("gradient check failed".into()))
    }
}
