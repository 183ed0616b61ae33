use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("download stalled: zero throughput share for a full segment")]
    StalledDownload,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("bitrate {0} kbps is not a member of the ladder")]
    NotInLadder(f64),

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("simulation horizon exceeded: {0}")]
    Horizon(String),

    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },

    #[error("config parse error in {path}: {reason}")]
    ConfigParse { path: PathBuf, reason: String },

    #[error("bad sweep spec: {0}")]
    SweepSpec(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
