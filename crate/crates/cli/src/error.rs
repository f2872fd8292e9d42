use std::fmt;
use std::io;

use crate::config::ConfigError;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Model(jumpdual::Error),
    Io(io::Error),
    /// The named checks did not pass.
    Verification(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) if e.is_infeasibility() => EXIT_INFEASIBLE,
            CliError::Verification(_) => EXIT_VERIFICATION,
            _ => EXIT_VALIDATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Model(e) if e.is_infeasibility() => write!(f, "infeasible model: {e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Verification(failed) => write!(f, "verification failed: {}", failed.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<jumpdual::Error> for CliError {
    fn from(e: jumpdual::Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}
