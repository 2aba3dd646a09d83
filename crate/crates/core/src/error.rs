use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fractional order {0} is outside the open interval (0, 1)")]
    InvalidOrder(f64),

    #[error("need at least {min} interior points, got {n}")]
    TooFewPoints { n: usize, min: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("dense size {size} exceeds the guard of {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("preconditioner breakdown: eigenvalue {index} has magnitude {magnitude:e}")]
    PreconditionerBreakdown { index: usize, magnitude: f64 },

    #[error("method {method} requires symmetric diffusivities (k+ = k- on every axis)")]
    SymmetryMismatch { method: String },

    #[error("theta = {0} is a zero of the symbol (multiple of 2*pi)")]
    LatticePoint(f64),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
