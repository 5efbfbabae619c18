use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use remix_cli::{cmd_eval, cmd_generate, cmd_gradcheck, cmd_train, config_help, CliError, RunConfig};
use remix_core::gradcheck::LossKind;

#[derive(Parser)]
#[command(name = "remix", version, about = "Joint multi-camera / single-camera re-identification training on synthetic data")]
#[command(after_long_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set train.gamma=0 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory that relative io.* paths are resolved against.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (same as --set seed=N).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic multi-camera, single-camera and target datasets.
    #[command(after_long_help = config_help())]
    Generate(Common),
    /// Train and write the metrics log and checkpoints.
    #[command(after_long_help = config_help())]
    Train(Common),
    /// Evaluate a checkpoint's momentum encoder on the target domain.
    #[command(after_long_help = config_help())]
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate (defaults to io.checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Finite-difference check of every loss gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Deliberately corrupt one analytic gradient (negative control).
        #[arg(long, hide = true, value_parser = parse_loss)]
        corrupt: Option<LossKind>,
    },
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::parse(s).ok_or_else(|| format!("unknown loss {s:?}"))
}

fn load(common: &Common, checkpoint: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    let mut sets = common.overrides.clone();
    if let Some(seed) = common.seed {
        sets.push(format!("seed={seed}"));
    }
    let mut cfg = RunConfig::load(common.config.as_deref(), &sets)?;
    if let Some(dir) = &common.out {
        cfg.io.rebase(dir);
        if cfg.eval.report.is_relative() {
            cfg.eval.report = dir.join(&cfg.eval.report);
        }
    }
    if let Some(c) = checkpoint {
        cfg.io.checkpoint = c.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(common) => cmd_generate(&load(&common, None)?).map(drop),
        Command::Train(common) => cmd_train(&load(&common, None)?).map(drop),
        Command::Eval { common, checkpoint } => cmd_eval(&load(&common, checkpoint.as_ref())?).map(drop),
        Command::Gradcheck { seed, corrupt } => cmd_gradcheck(seed, corrupt).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
