use std::fmt;
use std::io;

use saclab::config::ConfigError;

/// Failure classes, each with a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Validation(String),
    Divergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Divergence(m)
            | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<saclab::Error> for CliError {
    fn from(e: saclab::Error) -> Self {
        match e {
            saclab::Error::Divergence { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse { .. } => CliError::Parse(e.to_string()),
            ConfigError::Invalid(inner) => inner.into(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
