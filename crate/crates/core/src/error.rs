use std::path::PathBuf;

use thiserror::Error;

/// Newton iterate record kept for postmortem when a solve fails.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} cells / L={left_len} vs {right} cells / L={right_len}")]
    GridMismatch {
        left: usize,
        left_len: f64,
        right: usize,
        right_len: f64,
    },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid norm exponent p={0}; expected 1 <= p < inf")]
    InvalidExponent(f64),

    #[error("field has mean {mean:e}, exceeding tolerance {tol:e} for a mean-zero operation")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("non-finite value at cell ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("concentration {value} at cell ({i}, {j}) is outside the open interval (0, 1)")]
    RhoDomain { i: usize, j: usize, value: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("mean of {field} changed from {expected:e} to {actual:e}")]
    MeanMismatch {
        field: &'static str,
        expected: f64,
        actual: f64,
    },

    #[error("Newton iteration did not reach tolerance {tol:e} within {iterations} iterations (last residual {last:e})")]
    NewtonDivergence {
        tol: f64,
        iterations: usize,
        last: f64,
        history: Vec<IterateRecord>,
    },

    #[error("step damping fell below {min:e} at Newton iteration {iteration}")]
    StepDamped {
        min: f64,
        iteration: usize,
        history: Vec<IterateRecord>,
    },

    #[error("states are at different times: {fine} vs {coarse}")]
    TimeMismatch { fine: f64, coarse: f64 },

    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: usize, what: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing required key `{0}`")]
    MissingKey(&'static str),

    #[error("value out of range for `{key}`: {msg}")]
    Range { key: String, msg: String },

    #[error("checkpoint manifest hash {found} does not match run manifest {expected}")]
    ManifestMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
