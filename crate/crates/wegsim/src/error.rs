//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by configuration, trace parsing, analysis, and the
/// simulation driver.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or validation failure (CLI exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// Trace file did not parse or failed validation; carries the 1-based
    /// line number.
    #[error("trace error at line {line}: {message}")]
    Trace { line: usize, message: String },

    /// Domain error in an analytic operation (e.g. n = 0 where a dominant
    /// class is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// Underlying I/O failure (CLI exit code 3).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
