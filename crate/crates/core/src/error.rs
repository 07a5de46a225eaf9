use thiserror::Error;

/// Errors raised while building targets, operators, or running checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid product space: {0}")]
    InvalidSpace(String),

    #[error("weights have length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative weight {value} at flat index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights are all zero")]
    ZeroMass,

    #[error("invalid coordinate subset: {0}")]
    InvalidSubset(String),

    #[error("conditioning slice has zero mass")]
    ZeroMassSlice,

    #[error("target is not strictly positive")]
    NotStrictlyPositive,

    #[error("invalid step family: {0}")]
    InvalidFamily(String),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("operators are defined over different targets")]
    TargetMismatch,

    #[error("eigensolver failed to converge on a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("operator is reducible")]
    Reducible,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
