use thiserror::Error;

/// Errors raised by the geometry, family and estimation routines.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} is below threshold {threshold:e}")]
    NotPositiveDefinite { eigenvalue: f64, threshold: f64 },

    #[error("sample covariance is rank deficient (smallest eigenvalue {eigenvalue:e}, {samples} samples in dimension {dim})")]
    RankDeficient {
        eigenvalue: f64,
        samples: usize,
        dim: usize,
    },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("degenerate family: {0}")]
    DegenerateFamily(String),

    #[error("expected {expected} parameters, got {found}")]
    ParamLength { expected: usize, found: usize },

    #[error("invalid family shape: {0}")]
    InvalidShape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
