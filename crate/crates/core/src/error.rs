use thiserror::Error;

/// Errors raised by operator construction, factorizations, schedules and the iteration engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("operator is not nonexpansive: norm {norm} exceeds 1 + {tol}")]
    NotNonexpansive { norm: f64, tol: f64 },

    #[error("operator is not normal: commutator defect {defect}")]
    NotNormal { defect: f64 },

    #[error("fixed-point set is empty: (Id - L)x = b is inconsistent (residual {residual})")]
    EmptyFixedSet { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("explicit schedule exhausted at index {index} (length {len}) with no tail rule")]
    ScheduleExhausted { index: usize, len: usize },

    #[error("iteration cap exceeded: requested {requested}, cap {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("numerical abort at step {step}: {reason}")]
    NumericalAbort { step: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
