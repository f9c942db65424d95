use fockbath_core::Error as CoreError;
use thiserror::Error;

/// Failures surfaced by the runner, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Core errors raised while validating user input count as config errors.
    pub fn from_core_config(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_)
            | CoreError::ConstraintViolation(_)
            | CoreError::ModeCount(_)
            | CoreError::InvalidProtocol(_)
            | CoreError::InvalidGrid(_)
            | CoreError::InvalidPotential(_)
            | CoreError::DimensionOverflow { .. }
            | CoreError::BasisMismatch(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
