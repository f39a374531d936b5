use thiserror::Error;

/// Errors raised by the symbolic and numerical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid root system: {0}")]
    InvalidRootSystem(String),

    #[error("expected {expected} multiplicity value(s) (one per orbit), got {got}")]
    MultiplicityMismatch { expected: usize, got: usize },

    #[error("multiplicities must be nonnegative, got {0}")]
    NegativeMultiplicity(f64),

    #[error("root index {index} out of range ({count} positive roots)")]
    RootIndex { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("polynomial is not divisible by the linear form (remainder has {terms} term(s))")]
    InexactDivision { terms: usize },

    #[error("value is not representable exactly: {0}")]
    NotExact(String),

    #[error("linear system is singular (rank {rank} < {unknowns})")]
    Singular { rank: usize, unknowns: usize },

    #[error("linear system is inconsistent")]
    Inconsistent,

    #[error("degree {needed} exceeds the table limit {max}")]
    DegreeOverflow { needed: usize, max: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("reflection group has more than {0} elements")]
    GroupTooLarge(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
