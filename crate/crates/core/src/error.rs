use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid does not cover the amplitude: {mass:.3e} of the density lies outside")]
    GridCoverage { mass: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("argument outside the domain of definition: {0}")]
    Domain(String),

    #[error("Schmidt modes are required but missing")]
    MissingModes,

    #[error("numerical routine failed to converge: {0}")]
    Convergence(String),

    #[error("dense dimension {dim} exceeds the oracle cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("not a valid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("series cutoff too large: {0}")]
    CutoffTooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
