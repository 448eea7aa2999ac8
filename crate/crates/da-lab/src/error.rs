//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix size does not match the problem dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Inconsistent or inadmissible settings (bad constructor arguments,
    /// algorithm/schedule pairs, malformed config documents).
    #[error("config error: {0}")]
    Config(String),

    /// Argument outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested quantity depends on run state that is absent or empty.
    #[error("missing state: {0}")]
    MissingState(String),

    /// A non-finite value appeared during a run.
    #[error("diverged: non-finite value at step {step}")]
    Diverged { step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
