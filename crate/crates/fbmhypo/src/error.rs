use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("solution left the finite range at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("J * Jinv deviates from the identity by {deviation:e} at t = {time}")]
    Consistency { time: f64, deviation: f64 },

    #[error("control is not available: lambda_min = {lambda_min:e}")]
    SingularControl { lambda_min: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
