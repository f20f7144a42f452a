//! Crate-wide error type.

/// Alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A file could not be parsed; `line` is 1-based and includes the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Numerical failure (non-finite covariance, Cholesky breakdown after
    /// jitter escalation, all restarts diverged, ...).
    #[error("numeric error in {context}: {message}")]
    Numeric { context: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
