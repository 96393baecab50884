use thiserror::Error;

use crate::ladder::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model kind mismatch: {0}")]
    KindMismatch(String),

    #[error(
        "shifted cost at state {state}, action {action} is {value}, must be strictly negative"
    )]
    ShiftInsufficient {
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("eigenvector iterate collapsed to zero on the domain")]
    DegenerateEigenvector,

    #[error("reference state {0} carries zero eigenfunction mass on every rung")]
    ReferenceUnreachable(usize),

    #[error("truncation ladder exhausted without stabilization")]
    LadderNotConverged(Box<SolveReport>),

    #[error("eigenfunction vanishes at state {0} where an action must be selected")]
    ZeroPsi(usize),

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("policy space has {count} policies, above the cap of {cap}")]
    TooManyPolicies { count: u128, cap: u128 },

    #[error("row ({state}, {action}) leaks {leak:e} of its mass under the simulated policy")]
    LeakyKernel {
        state: usize,
        action: usize,
        leak: f64,
    },

    #[error("invalid policy at state {state}: action {action} out of range")]
    InvalidPolicy { state: usize, action: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
