use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FracPqError {
    #[error("invalid interval ({a}, {b}): need finite a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("grid needs at least one cell")]
    EmptyGrid,

    #[error("invalid fractional parameters s = {s}, r = {r}: need 0 < s < 1 < r")]
    InvalidParams { s: f64, r: f64 },

    #[error("invalid (p,q) configuration: {0}")]
    InvalidConfig(String),

    #[error("node {index} lies on the boundary; exterior kernel integral diverges")]
    BoundaryNode { index: usize },

    #[error("node index {index} out of range for a grid with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("grid function lives on a different grid ({found} values, expected {expected})")]
    GridMismatch { expected: usize, found: usize },

    #[error("kernel weight overflow between nodes {i} and {j}")]
    Overflow { i: usize, j: usize },

    #[error("the zero function has no Rayleigh quotient")]
    ZeroFunction,

    #[error("Nehari scaling undefined: H = {h}, G = {g} do not have opposite signs")]
    UndefinedScale { h: f64, g: f64 },

    #[error("function must be strictly positive, found {value} at node {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("ordering violated at node {index}: lower {lower} > upper {upper}")]
    OrderingViolation { index: usize, lower: f64, upper: f64 },

    #[error("supersolution certificate failed at node {index}: weak residual {residual}")]
    NotSupersolution { index: usize, residual: f64 },

    #[error("constraint set empty: alpha = {alpha} below lambda1 = {lambda1}")]
    Infeasible { alpha: f64, lambda1: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, FracPqError>;
