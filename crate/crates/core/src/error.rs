use thiserror::Error;

/// Errors raised by the filtering, assessment and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmcError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was invoked on a particle set in the wrong stage.
    #[error("protocol error: {operation} requires stage {expected}, found {found}")]
    Protocol {
        operation: &'static str,
        expected: &'static str,
        found: &'static str,
    },

    /// Every particle had zero likelihood for the observation at `time_index`.
    #[error("degenerate weights at t = {time_index}: all likelihoods are zero")]
    DegenerateWeights { time_index: usize },

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SmcError {
    fn from(e: std::io::Error) -> Self {
        SmcError::Io(e.to_string())
    }
}

impl From<csv::Error> for SmcError {
    fn from(e: csv::Error) -> Self {
        SmcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SmcError>;
