//! Error type shared by every module in the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by parsing, validation, and the numeric pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A record in an input stream could not be parsed. `line` is 1-based.
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },

    /// A configuration value is outside its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input violates a function precondition (empty series, NaN, …).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two records carry the same identifier but disagree on content.
    #[error("conflicting duplicate for id `{id}`: {message}")]
    Conflict { id: String, message: String },

    /// The regression design matrix does not have full column rank.
    #[error("rank-deficient design: columns {columns:?} are collinear")]
    RankDeficient { columns: Vec<String> },

    /// A requested window extends past the available series range.
    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),

    /// Underlying I/O failure while reading or writing a stream.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV-level failure not attributable to a specific record.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Shorthand for [`Error::Malformed`].
    pub fn malformed(line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            line,
            message: message.into(),
        }
    }

    /// Shorthand for [`Error::InvalidInput`].
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// Shorthand for [`Error::Config`].
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
