//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The benchmark binary maps variants onto process exit codes: configuration
/// problems are usage errors (1), data and I/O problems are data errors (2),
/// and training failures are numerical errors (3).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input file, with the offending line when known.
    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    /// Data that parses but violates a semantic requirement.
    #[error("invalid data: {0}")]
    Data(String),

    /// Dimension or index mismatch between related values.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Non-finite value where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    /// Any other numerical failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI reports for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            Error::Csv { .. } | Error::Data(_) | Error::Shape(_) | Error::NonFinite(_) => 2,
            Error::Io(_) => 2,
            Error::Diverged { .. } | Error::Numerical(_) => 3,
        }
    }
}
