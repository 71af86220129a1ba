use thiserror::Error;

/// Errors raised by the functional covariance tests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid must be uniform: {0}")]
    NonUniformGrid(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("group has no curves")]
    EmptyGroup,

    #[error("need at least {needed} curves, got {got}")]
    TooFewCurves { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error("covariance is not symmetric (max asymmetry {asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("covariance has a negative eigenvalue {value:e} beyond tolerance {tolerance:e}")]
    NegativeEigenvalue { value: f64, tolerance: f64 },

    #[error("all eigenvalues are zero; the pooled sample has no variability")]
    ZeroVariance,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric { .. }
                | Error::NegativeEigenvalue { .. }
                | Error::ZeroVariance
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
