//! Experiment runner: configuration, dispatch to the library checks, and
//! pass/fail reports.

pub mod config;
pub mod experiments;
pub mod report;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, Outcome};
pub use report::{emit_report, Report, Verdict};

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid command line or configuration.
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] tdlab::LabError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
