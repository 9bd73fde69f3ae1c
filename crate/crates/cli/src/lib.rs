//! Experiment runner for algebra-valued networks: configuration, runs,
//! sweeps, reports and quick self-checks.

pub mod checks;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, Model, Task};
pub use run::{run_experiment, RunSummary, SummaryMetric};

/// Failure of a subcommand. Usage errors exit with 2, runtime errors with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<csnet::Error> for CliError {
    fn from(e: csnet::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
