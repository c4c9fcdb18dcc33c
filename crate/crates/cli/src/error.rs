use thiserror::Error;

/// Failures mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input text, reported with the parser's location.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error(
        "unknown emit kind {0:?}; expected one of regime-grid, supnorm-vs-time, functional-traces, scaling-loglog"
    )]
    UnknownKind(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) | CliError::UnknownKind(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::VerificationFailed(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
