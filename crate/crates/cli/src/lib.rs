//! Experiment runner for the `neseek` library: TOML configs, CSV trajectory logs,
//! SVG plots and the averaging study.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod log;
pub mod plot;
pub mod runner;
pub mod study;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] neseek::Error),
    #[error("diverged at jump {jump}: distance to x* is {dist:e}")]
    Diverged { jump: u64, dist: f64 },
    #[error("resonant frequencies: {0}")]
    Resonant(String),
    #[error("plot: {0}")]
    Plot(String),
}

impl CliError {
    /// Process exit code: 2 for bad input, 3 for resonant frequencies, 4 for divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Resonant(_) => 3,
            CliError::Diverged { .. } => 4,
            _ => 1,
        }
    }
}

/// Wraps an IO error with the path it concerns.
pub fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
