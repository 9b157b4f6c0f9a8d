use thiserror::Error;

use crate::point::Point;

/// Errors raised by the solvers, problem constructors and certificates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operator or oracle returned a non-finite vector.
    #[error("non-finite operator value at iteration {iteration} (point {point:?})")]
    Evaluation { iteration: u64, point: Point },

    /// The step parameter or its update overflowed.
    #[error("step parameter diverged at iteration {iteration} (value {value:e})")]
    Diverged { iteration: u64, value: f64 },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl Error {
    /// Iteration at which a solver failed, looking through seed tags.
    pub fn iteration(&self) -> Option<u64> {
        match self {
            Error::Evaluation { iteration, .. } | Error::Diverged { iteration, .. } => Some(*iteration),
            Error::Seed { source, .. } => source.iteration(),
            _ => None,
        }
    }

    /// Seed of the failing run, if the error was tagged with one.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Error::Seed { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Whether the error stems from bad input rather than a failed run.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::InvalidArgument(_) | Error::Unsupported(_) | Error::Json(_) => true,
            Error::Seed { source, .. } => source.is_invalid_input(),
            _ => false,
        }
    }
}
