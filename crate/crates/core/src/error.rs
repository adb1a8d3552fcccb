use thiserror::Error;

/// Errors raised by the numerical kernels, samplers and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector is not unit norm (norm = {norm})")]
    NonUnit { norm: f64 },

    #[error("singular evaluation at x = {0} (|x| too close to 1)")]
    Singularity(f64),

    #[error("degenerate interval [{lo}, {hi}]: conditional mass {mass:e} below tolerance")]
    DegenerateInterval { lo: f64, hi: f64, mass: f64 },

    #[error("degenerate schedule: {0}")]
    ScheduleDegenerate(String),

    #[error("drift was not recorded for this run")]
    MissingDrift,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
