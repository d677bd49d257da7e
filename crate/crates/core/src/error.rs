use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum KsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("admissibility gate rejected the input: {0}")]
    Gate(String),

    #[error("resource budget exceeded: {tuples} tuples requested, budget is {budget}")]
    Budget { tuples: f64, budget: u64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("iteration did not converge after {iterations} steps (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KsError>;
