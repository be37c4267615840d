use thiserror::Error;

/// Errors raised by the library. The command line maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size cap exceeded: {what} needs {required}, cap is {cap}")]
    CapExceeded {
        what: String,
        required: u128,
        cap: u128,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("eigensolver did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn cap(what: impl Into<String>, required: u128, cap: u128) -> Self {
        Error::CapExceeded {
            what: what.into(),
            required,
            cap,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
