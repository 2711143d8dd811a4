//! Command-line front end: reads a JSON run configuration, solves or
//! tabulates, and writes plot-ready CSV/JSON files.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use commands::{run, Command};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input; exit status 1.
    #[error("{0}")]
    Invalid(String),
    /// Solver finished without meeting its tolerance; exit status 2.
    #[error("{0}")]
    NotConverged(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] biased_spline::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => 2,
            _ => 1,
        }
    }
}
