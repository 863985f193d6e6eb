use thiserror::Error;

/// Errors raised by the estimation primitives, models and filters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Factorization failed even after the jitter ladder.
    #[error("matrix is not positive semi-definite (leading minor {minor} failed)")]
    NotPsd { minor: usize },

    /// Eigenvalue check of a covariance failed.
    #[error("covariance is indefinite (smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})")]
    Indefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    /// The innovation covariance could not be factorized or is too badly
    /// conditioned to invert.
    #[error(
        "innovation covariance is singular or ill-conditioned (condition estimate {condition:e})"
    )]
    SingularInnovation { condition: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A model was evaluated outside its physical domain.
    #[error("model domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("likelihood underflow: every particle weight is zero")]
    WeightUnderflow,

    #[error("weights are not normalized (sum = {0})")]
    Unnormalized(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
