//! Configuration, experiment dispatch and file output for the `cavsim` binary.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{ExperimentKind, Overrides, RunConfig};
pub use run::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration problems, 2 for everything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

impl From<cavsim_core::Error> for CliError {
    fn from(e: cavsim_core::Error) -> Self {
        match e {
            cavsim_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e.to_string()))
    }
}
