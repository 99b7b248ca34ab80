use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The point sits on (or across) the null cone of the indefinite form,
    /// so it cannot be rescaled onto the requested quadric.
    #[error("null cone violation: <y, y> = {value:e} (target level {level})")]
    NullConeViolation { value: f64, level: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid index pair ({i}, {j}) for dimension {dim}")]
    InvalidIndex { i: usize, j: usize, dim: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("field is not divergence free: |div V| = {norm:e} > tol {tol:e}")]
    NotDivergenceFree { norm: f64, tol: f64 },

    #[error("matrix field is not so(1,1)-valued at node {node}")]
    NotSo11 { node: usize },

    #[error("map leaves the tubular neighbourhood at node {node} (distance {distance:e})")]
    OutOfTube { node: usize, distance: f64 },

    #[error("ball family is empty")]
    EmptyFamily,

    #[error("center {center} has only {count} admissible radii (need {needed})")]
    InsufficientRadii { center: usize, count: usize, needed: usize },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("argument {value:e} too large for hyperbolic functions")]
    Overflow { value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
