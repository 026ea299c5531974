use thiserror::Error;

/// Errors produced by the model, filter, solvers and configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// The filter was handed an observation with zero likelihood under the
    /// attacker profile it conditions on.
    #[error("observation {observation} has zero likelihood under the conditioning probe profile")]
    ImpossibleObservation { observation: &'static str },

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e}, bound {bound:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        bound: f64,
    },

    #[error("best-response table has no threshold structure ({0})")]
    Degenerate(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
