use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Bracket scan found no sign change.
    #[error("no root found: {0}")]
    NoRoot(String),

    /// The escape theorem's hypothesis does not hold, so it says nothing.
    #[error("hypothesis not met: width {width} >= sqrt(m) - 1/(4 sqrt(m)) = {limit}")]
    HypothesisNotMet { width: f64, limit: f64 },

    #[error("matrix is rank deficient (pivot {pivot} of {size})")]
    Rank { pivot: usize, size: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    Factor { pivot: usize },

    #[error("no 50% crossing in the supplied cells")]
    NoCrossing,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures, as opposed to bad arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoRoot(_) | Error::Rank { .. } | Error::Factor { .. } | Error::NoCrossing
        )
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}
