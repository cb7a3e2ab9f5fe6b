//! Command-line front end: ingestion, preprocessing, synthetic data,
//! training, evaluation, gradient checking and experiment reports.

pub mod cli;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod svg;

pub use cli::{run, Cli, Command};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] skelact::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad input, 2 for runtime or numerical faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}
