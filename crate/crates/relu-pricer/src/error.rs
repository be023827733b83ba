use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite weight at layer {layer}")]
    NonFiniteWeight { layer: usize },
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("invalid depth: requested {requested}, network has {actual}")]
    InvalidDepth { requested: usize, actual: usize },
    #[error("depth mismatch: {0:?}")]
    DepthMismatch(Vec<usize>),
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("invalid arity {0}")]
    InvalidArity(usize),
    #[error("invalid scale {0}")]
    InvalidScale(f64),
    #[error("empty factor list")]
    EmptyFactorList,
    #[error("oracle range violation: |f^({order})({point})| = {value}")]
    OracleRangeViolation { order: usize, point: f64, value: f64 },
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("derivative order {0} too large for exact coefficient tables")]
    OrderTooLarge(usize),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("quadrature order {0} unsupported")]
    OrderUnsupported(usize),
    #[error("invalid quadrature limit {0}")]
    InvalidLimit(f64),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),
    #[error("predicted size {predicted_m:.3e} exceeds budget {budget:.3e}")]
    BudgetExceeded { predicted_m: f64, predicted_l: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
