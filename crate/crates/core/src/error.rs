use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum MspError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is numerically singular (pivot {pivot:.3e} at index {index})")]
    Singular { index: usize, pivot: f64 },

    #[error("operator not PSD at this vector (inner product {0:.3e})")]
    NotPsd(f64),

    #[error("declared symmetric matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sketch rank collapse: core matrix failed to factor after jitter {jitter:.3e}")]
    RankCollapse { jitter: f64 },

    #[error("inconsistent trace estimate {estimate:.3e} (trace {trace:.3e})")]
    InconsistentEstimate { estimate: f64, trace: f64 },

    #[error("Lanczos breakdown: {0}")]
    Breakdown(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MspError> = std::result::Result<T, E>;
