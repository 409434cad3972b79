use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A constraint or feasibility requirement cannot be met.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("no convergence after {iterations} iterations (max violation {max_violation:e})")]
    NonConvergence { iterations: usize, max_violation: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by constraints or feasibility rather than malformed input.
    pub fn is_constraint_error(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_) | Error::NonConvergence { .. } | Error::Factorization(_)
        )
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
