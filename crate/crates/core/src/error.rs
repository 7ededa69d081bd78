use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box {0:?}")]
    InvalidBox([f64; 4]),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid result log: {0}")]
    InvalidLog(String),

    #[error("latency trace exhausted: processed frame #{needed} has no processing time ({available} available)")]
    TraceExhausted { needed: usize, available: usize },

    #[error("invalid latency model: {0}")]
    InvalidLatency(String),

    #[error("wall-clock latency must be measured by the runner")]
    WallClockUnsimulated,

    #[error("length mismatch: {outputs} outputs vs {truth} ground-truth frames")]
    LengthMismatch { outputs: usize, truth: usize },

    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("tracker failed on frame {frame}: {message}")]
    Tracker { frame: usize, message: String },

    #[error("external tracker protocol error: {0}")]
    Protocol(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
