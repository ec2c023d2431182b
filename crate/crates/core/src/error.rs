use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("grid mismatch: expected {expected} interior values, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("flow stalled: no step accepted down to dt = {dt:.3e}")]
    Stall { dt: f64 },
    #[error("seeding failed after {attempts} attempts")]
    Seeding { attempts: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no solution in batch matches the requested class")]
    EmptyBatch,
}

pub type Result<T> = std::result::Result<T, Error>;
