//! Configuration-driven experiment drivers writing CSV tables and plot scripts.

pub mod commands;
pub mod config;
pub mod format;
pub mod validate;

use shellnp::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Io(String),
    #[error("{0}")]
    Numerical(#[from] Error),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    /// 1 validation failure, 2 configuration error, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(Error::InvalidArgument(_) | Error::GeometryDegenerate(_)) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
