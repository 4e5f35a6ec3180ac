use thiserror::Error;

pub type Result<T, E = AboError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AboError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variance coordinate {index} is {value}; variances must be positive")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{points} points but {values} values")]
    LengthMismatch { points: usize, values: usize },

    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("matrix is singular or not positive definite ({0})")]
    SingularMatrix(&'static str),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("{0} is not supported by this similarity")]
    Unsupported(&'static str),

    #[error("Monte Carlo sample count must be at least 1")]
    EmptySample,
}

impl AboError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        AboError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
