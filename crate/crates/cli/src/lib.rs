//! Experiment orchestration for the lattice branching lab: configuration
//! parsing, presets, artifact writers and plot emission.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod snapshot;

pub use config::{parse_config, ExperimentKind, RunConfig};
pub use experiments::{run_experiment, RunOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] lrbs_core::CoreError),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("config error: {0}")]
    ConfigGeneral(String),
    #[error("experiment mismatch: config declares '{config}', command is '{command}'")]
    ExperimentMismatch { config: String, command: String },
    #[error("{path}: line {line}: {message}")]
    Snapshot { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = Result<T, CliError>;
