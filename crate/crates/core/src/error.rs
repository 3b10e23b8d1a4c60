use thiserror::Error;

/// Errors raised by the solvers and their subroutines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point is infeasible for {set}: {detail}")]
    Infeasible { set: String, detail: String },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("root bracketing failed for {what} (residuals at bracket ends: {lo_residual:e}, {hi_residual:e})")]
    Bracketing {
        what: &'static str,
        lo_residual: f64,
        hi_residual: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("missing data: {0}")]
    Missing(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
