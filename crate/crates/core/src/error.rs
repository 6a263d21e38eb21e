use thiserror::Error;

use crate::parareal::IterationTrace;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter coordinate {index} = {value} outside support [{lo}, {hi}]")]
    OutOfSupport {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("simplified Newton loop for the coupled coarse system did not converge after {iters} iterations (increment {increment:e})")]
    CoupledNonConvergence {
        iters: usize,
        increment: f64,
        last: Vec<nalgebra::DVector<f64>>,
    },

    #[error("iteration limit {max} reached before the stopping tolerance was met")]
    MaxItersExceeded {
        max: usize,
        trace: Box<IterationTrace>,
    },

    #[error("singular matrix: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("shifted system {index} is numerically singular")]
    SingularShift { index: usize },

    #[error("least-squares matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("truncated Gaussian acceptance rate {rate:e} is below 1e-6")]
    AcceptanceTooLow { rate: f64 },

    #[error("operation not supported for model {model}: {what}")]
    Unsupported { model: String, what: String },

    #[error("sample {id}: {source}")]
    Sample {
        id: usize,
        #[source]
        source: Box<SolverError>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;
