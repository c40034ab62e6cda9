//! Scenario-driven front end: configuration, pipelines and the validation
//! suite behind the `roughfil` binary.

pub mod config;
pub mod pipeline;
pub mod suite;

use std::fmt;

pub use config::{ConfigError, Scenario};

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical { check: String, message: String },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } | Self::Io(_) => 3,
        }
    }

    pub fn numerical(check: &str, e: impl fmt::Display) -> Self {
        Self::Numerical { check: check.to_string(), message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Numerical { check, message } => write!(f, "numerical failure in {check}: {message}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
