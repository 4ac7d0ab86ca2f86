use thiserror::Error;

/// Errors raised by the engine. Every variant names the operation or
/// precondition that failed so that reports can carry module provenance.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("insufficient jet order in {context}: need {needed}, have {available}")]
    InsufficientOrder {
        context: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("axis {axis} out of range for {dim} coordinates")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("{0}: constant term is zero")]
    ZeroConstantTerm(&'static str),

    #[error("{0}: constant term has no square root in this field")]
    NoSquareRoot(&'static str),

    #[error("{context}: not divisible by the defining function (remainder of order {remainder_order} is nonzero)")]
    NotDivisible {
        context: &'static str,
        remainder_order: usize,
    },

    #[error("defining function: {0}")]
    DefiningFunction(String),

    #[error("{operation} requires dimension >= {required}, got {dim}")]
    DimensionTooSmall {
        operation: &'static str,
        required: usize,
        dim: usize,
    },

    #[error("{operation}: weight {weight} is excluded")]
    ForbiddenWeight { operation: &'static str, weight: String },

    #[error("singular linear update at step {step} of the Yamabe solver")]
    SingularUpdate { step: usize },

    #[error("metric is not positive definite at the base point")]
    NotPositiveDefinite,

    #[error("{0}: value must be positive at the base point")]
    NotPositive(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tractor vanishes identically to valid order")]
    ZeroTractor,

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
