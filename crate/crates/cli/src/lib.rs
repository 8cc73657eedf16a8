//! Experiment runner for qmarl: config files, training runs, gradient checks
//! and agent comparisons.
//!
//! Exit codes shared by every command: 0 success, 1 a check failed,
//! 2 bad configuration, 3 failure while running.

pub mod compare;
pub mod config;
pub mod gradcheck;
pub mod run;

pub use config::{parse_config, parse_config_str, ExperimentConfig, LoadedConfig, SeedSource};
pub use run::{run_train, RunManifest, RunOutcome, RunStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget of {budget} parameters is infeasible, at least {minimum} needed")]
    Infeasible { budget: usize, minimum: usize },
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Infeasible { .. } => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// Sorts a core error raised while setting up a run.
    pub(crate) fn setup(e: qmarl::Error) -> Self {
        match e {
            qmarl::Error::BudgetInfeasible { budget, minimum } => CliError::Infeasible { budget, minimum },
            other => CliError::Config(message(other)),
        }
    }

    pub(crate) fn config(e: qmarl::Error) -> Self {
        CliError::Config(message(e))
    }

    pub(crate) fn io(what: &str, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("{what}: {e}"))
    }
}

/// A core error's text without the prefix `CliError` adds again.
fn message(e: qmarl::Error) -> String {
    match e {
        qmarl::Error::Config(m) => m,
        other => other.to_string(),
    }
}
