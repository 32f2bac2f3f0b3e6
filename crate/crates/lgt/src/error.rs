//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by toolkit operations.
#[derive(Debug, Error)]
pub enum LgtError {
    /// Mismatched group variants, dimensions, or basis cutoffs.
    #[error("incompatible operands: {0}")]
    Incompatible(String),
    /// Invalid argument (bad cutoff, empty path, malformed index, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A request would exceed a hard resource guard.
    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),
    /// Numerical procedure failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// Serialization / deserialization failure.
    #[error("serialization error: {0}")]
    Serde(String),
    /// I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for LgtError {
    fn from(e: serde_json::Error) -> Self {
        LgtError::Serde(e.to_string())
    }
}

/// Toolkit-wide result alias.
pub type Result<T> = std::result::Result<T, LgtError>;
