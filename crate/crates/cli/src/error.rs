use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PHYSICS: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Physics(#[from] jtchain::Error),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Config(_) => exit::CONFIG,
            // Bad input values and empty bisection ranges are user errors.
            CliError::Physics(jtchain::Error::InvalidParams(_) | jtchain::Error::NoBracket { .. }) => exit::CONFIG,
            CliError::Physics(_) => exit::PHYSICS,
            CliError::Validation(_) => exit::VALIDATION,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
