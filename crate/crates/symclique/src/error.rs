use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value {value} out of range for {r} values")]
    ValueOutOfRange { value: usize, r: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("search space too large: {size:e} assignments exceeds cap {cap:e}")]
    TooLarge { size: f64, cap: f64 },

    #[error("solver not applicable: {0}")]
    NotApplicable(String),

    #[error("infeasible subproblem: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
