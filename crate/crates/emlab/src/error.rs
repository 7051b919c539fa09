//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, estimation, and I/O layers.
#[derive(Debug, Error)]
pub enum EmlabError {
    /// Operands or state dimensions do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested estimator cannot handle the given noise model.
    #[error("unsupported noise model: {0}")]
    UnsupportedNoise(String),

    /// A numerical routine failed (e.g. an eigensolver did not converge).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Text input (Pauli strings, configs) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A configuration file is structurally valid but semantically wrong.
    #[error("config error: {0}")]
    Config(String),

    /// A shot budget cap was hit before the accuracy target was met.
    #[error("shot budget exhausted: needed {needed} shots, cap {cap}")]
    BudgetExceeded { needed: u64, cap: u64 },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, EmlabError>;
