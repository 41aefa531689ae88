//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a type invariant (bad probability, empty alphabet,
    /// out-of-range rate, ...). The message names the violated constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sampler refused to run because the expected output size exceeds the
    /// configured cap.
    #[error("infeasible sample: {0}")]
    Infeasible(String),

    /// A numerical routine could not deliver its contract (no sign change for
    /// bisection, non-monotone table, exhausted iterations).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
