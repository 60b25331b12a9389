use thiserror::Error;

/// Errors raised across the measurement-noise toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is not a positive power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gate is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("malformed PTM: {0}")]
    MalformedPtm(String),

    #[error("matrix is not column-stochastic: {0}")]
    NotStochastic(String),

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("least-squares fit is rank deficient (rank {rank} < {needed})")]
    RankDeficientFit { rank: usize, needed: usize },

    #[error("calibration matrix is singular")]
    SingularMatrix,

    #[error("degenerate calibration: predicted probability of outcome {outcome} vanished")]
    DegenerateCalibration { outcome: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite cost value")]
    NonFiniteCost,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
