//! Library side of the `remix` tool, so the commands can be driven from tests.

pub mod commands;
pub mod config;

pub use commands::{cmd_eval, cmd_generate, cmd_gradcheck, cmd_train, GenerateSummary, TrainSummary};
pub use config::{config_help, documented_keys, EvalConfig, IoConfig, RunConfig, SplitRule};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] remix_core::Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    /// 1 for usage/config problems, 2 for runtime failures, 3 for a failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Runtime(remix_core::Error::InvalidConfig(_)) => 1,
            CliError::Runtime(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}
