use thiserror::Error;

/// Errors raised by jet arithmetic and the invariant machinery built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("variable sets differ: {left:?} vs {right:?}")]
    VarMismatch { left: Vec<String>, right: Vec<String> },
    #[error("base points differ")]
    BaseMismatch,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("{what} needs jet order >= {needed}, got {got}")]
    OrderTooLow {
        what: String,
        needed: u32,
        got: u32,
    },
    #[error("divisor has a vanishing constant term")]
    NonUnit,
    #[error("{func} is not analytic at {value}")]
    Domain { func: String, value: String },
    #[error("{func}({value}) is irrational; use the float backend")]
    NeedsFloat { func: String, value: String },
    #[error("implicit equation does not vanish at the base point (residual {0})")]
    ImplicitNotZero(String),
    #[error("implicit equation is degenerate: d/d{0} vanishes at the base point")]
    ImplicitDegenerate(String),
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("affine map is singular (determinant 0)")]
    SingularMap,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
