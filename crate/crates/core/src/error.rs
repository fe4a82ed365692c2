use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("generator entry ({row},{col}) = {value} is negative off the diagonal")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("generator column {col} sums to {sum}, expected 0")]
    ColumnSumNonzero { col: usize, sum: f64 },

    #[error("generator is reducible: {0}")]
    ReducibleChain(String),

    #[error("all intensities must be strictly positive: {0}")]
    PositivityRequired(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    #[error("step size underflow: {0}")]
    StepSizeUnderflow(String),

    #[error("numerical check failed: {0}")]
    NumericalCheck(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
