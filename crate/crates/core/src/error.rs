use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid algebra shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("factor label {0} appears more than once")]
    DuplicateLabel(u32),
    #[error("unknown factor label {0}")]
    UnknownLabel(u32),
    #[error("matrix has entries outside the block pattern (largest {0:e})")]
    OffBlock(f64),
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("operator is not Hermitian (relative residual {0:e})")]
    NotHermitian(f64),
    #[error("operator is not positive (minimum eigenvalue {0:e})")]
    NotPositive(f64),
    /// A checked precondition or membership condition failed.
    #[error("{what} (residual {residual:e})")]
    Violation { what: String, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("dimension {dim} exceeds the configured budget {budget}")]
    Budget { dim: usize, budget: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn violation(what: impl Into<String>, residual: f64) -> Self {
        Error::Violation {
            what: what.into(),
            residual,
        }
    }
}
