use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spin magnitude must satisfy 2S >= 1, got 2S = {0}")]
    InvalidSpin(u32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site-set mismatch: {left} sites vs {right} sites")]
    SiteMismatch { left: usize, right: usize },

    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("contour enumeration over {blocks} blocks exceeds the cap {cap}")]
    ContourCap { blocks: usize, cap: usize },

    #[error("invalid model specification: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("event looks like a null set: all {samples} samples were rejected")]
    ZeroMeasure { samples: usize },

    #[error("constrained chain is not ergodic: acceptance rate {0:.3e}")]
    NonErgodic(f64),

    #[error("good events {0} and {1} overlap on the same block")]
    OverlappingEvents(usize, usize),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("parameter regime violated: {0}")]
    Regime(String),

    #[error("extrapolation did not converge: {0}")]
    Extrapolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
