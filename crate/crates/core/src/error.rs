use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigen solver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("operation requires a separable non-smooth term")]
    NotSeparable,

    #[error("operation requires an indicator term, found {0}")]
    NotIndicator(&'static str),

    #[error("solver state poisoned at iteration {k}: {reason}")]
    Poisoned { k: usize, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate rating for (user {user}, item {item}) at line {line}")]
    DuplicateRating { user: usize, item: usize, line: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
