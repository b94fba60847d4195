use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum SqgError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("input is not zero-mean (lumped mean {mean:e})")]
    NotZeroMean { mean: f64 },

    #[error("linear solve did not converge at y = {y} (relative residual {residual:e} after {iterations} iterations)")]
    SincSolveFailed {
        y: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("linear solve did not converge (relative residual {residual:e} after {iterations} iterations)")]
    SolveFailed { residual: f64, iterations: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operator is not translation invariant on the uniform mesh")]
    NotCirculant,

    #[error("dense spectral oracle refuses n_side = {0} (limit 32)")]
    OracleTooLarge(usize),

    #[error("spectrum band [{lo}, {hi}] invalid: {reason}")]
    InvalidBand {
        lo: usize,
        hi: usize,
        reason: String,
    },

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("step {step} at t = {time}: {source}")]
    RunAborted {
        step: usize,
        time: f64,
        #[source]
        source: Box<SqgError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SqgError>;
