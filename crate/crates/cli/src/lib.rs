//! Experiment runner for `entangle-core`: strict TOML configs, parameter
//! sweeps, traces and Monte-Carlo checks written as CSV plus JSON.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod output;
pub mod point;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, Mode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver error: {0}")]
    Core(#[from] entangle_core::Error),
}

impl CliError {
    /// Process exit code: 2 for config and usage errors, 3 for IO, 1 for
    /// solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => 3,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}
