//! Error type shared across the kernel.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("missing binding for variable `{0}`")]
    MissingBinding(String),

    #[error("odd index {index} out of range for {count} odd variables")]
    OddIndexOutOfRange { index: usize, count: usize },

    #[error("context mismatch: {0}")]
    ContextMismatch(String),

    #[error("parity violation: {0}")]
    ParityViolation(String),

    #[error("arity mismatch: expected {expected} {what}, got {got}")]
    ArityMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("point outside declared box: {0}")]
    PointOutsideBox(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("chart invertibility certificate failed: {0}")]
    ChartNotInvertible(String),

    #[error("point is not on the fiber: {0}")]
    PointNotOnFiber(String),

    #[error("no chart of the submanifold contains the point {0}")]
    PointInNoChart(String),

    #[error("morphism is not transversal to the submanifold; witness point {0}")]
    NotTransversal(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("invalid declaration: {0}")]
    Invalid(String),

    /// Two implementations of the same mathematical fact disagreed; this is
    /// a bug in the library, never a statement about the input.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
