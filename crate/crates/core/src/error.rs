use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the simulator and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("input {value} outside [0, 1]")]
    InputRange { value: f64 },

    #[error("drive multiplier {value:.4} exceeds cap {cap} (interval {interval})")]
    DriveSaturation { value: f64, cap: f64, interval: usize },

    #[error("numeric blow-up at cell {cell} (t = {time:.4e} s)")]
    NumericBlowup { cell: usize, time: f64 },

    #[error("simulation failed in interval {interval}: {source}")]
    Interval {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch}")]
    Training { epoch: usize },

    #[error("gradient probe failed at parameter {index}: {source}")]
    Probe {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_interval(self, interval: usize) -> Self {
        match self {
            // already carries its own interval
            e @ (Error::DriveSaturation { .. } | Error::Interval { .. }) => e,
            e => Error::Interval {
                interval,
                source: Box::new(e),
            },
        }
    }
}
