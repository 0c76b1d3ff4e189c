use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("level {level} out of range (max {max})")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("truncation level {level} with dimension {dim} exceeds the memory cap")]
    LevelCap { dim: usize, level: usize },
    #[error("invalid exponent {0}: must be at least 1")]
    InvalidExponent(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {0} is not on the sample grid")]
    OffGrid(f64),
    #[error("sample times are not strictly increasing at row {0}")]
    NonMonotoneTimes(usize),
    #[error("partition too small: {0} points")]
    PartitionTooSmall(usize),
    #[error("exact mixed variation limited to {cap} points per axis, got {got}")]
    SizeCap { cap: usize, got: usize },
    #[error("no convergence after {rounds} rounds: last sums {previous:?} and {last:?}")]
    NonConvergence {
        rounds: usize,
        previous: Vec<f64>,
        last: Vec<f64>,
        decay: Option<f64>,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
