use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("branching cell {target} <- {source_stream} is forbidden by the interaction pattern (value {value})")]
    ForbiddenCell {
        target: String,
        source_stream: String,
        value: f64,
    },

    #[error("events out of order at index {index}")]
    Unsorted { index: usize },

    #[error("time {time} lies outside the horizon [{start}, {end}]")]
    OutOfHorizon { time: f64, start: f64, end: f64 },

    #[error("query time {time} precedes the first event of a left-truncated history")]
    TruncatedHistory { time: f64 },

    #[error("branching matrix has spectral radius {radius} >= 1 (non-stationary)")]
    NonStationary { radius: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code category: 2 input error, 3 numerical failure,
    /// 4 non-stationary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            Error::NonStationary { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
