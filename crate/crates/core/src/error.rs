use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the restoration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step size {delta} violates the bound delta < {max_step}")]
    StepSizeViolation { delta: f64, max_step: f64 },
    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("prior unavailable for this denoiser")]
    PriorUnavailable,
    #[error("prior weight mismatch: denoiser implies {denoiser}, problem has {problem}")]
    PriorWeightMismatch { denoiser: f64, problem: f64 },
    #[error("tape does not match the parameters or input it is applied to")]
    StaleTape,
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
