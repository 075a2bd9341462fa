use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state has {got} species but the network has {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Total propensity vanished, so no jump can be drawn.
    #[error("absorbing state {state:?} reached at step {step}")]
    Absorbing { state: Vec<u64>, step: u64 },

    /// A reaction with zero propensity was fired. Signals an engine bug.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("unsupported analysis: {0}")]
    Unsupported(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("chain is reducible; communication classes: {classes:?}")]
    Reducible { classes: Vec<Vec<usize>> },

    #[error("empty class: {0}")]
    EmptyClass(String),

    #[error("noise offset overflow")]
    ShiftOverflow,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
