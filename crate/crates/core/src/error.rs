use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decomposition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("vertex budget error: {0}")]
    Budget(String),

    #[error("empty cluster")]
    EmptyCluster,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("subdivision level error: {0}")]
    Level(String),

    #[error("averaged corner normal is near-tangent at corner {corner} ({angle_deg:.1} deg from face normal)")]
    DegenerateNormal { corner: usize, angle_deg: f64 },

    #[error("hole overlap: {0}")]
    Overlap(String),

    #[error("hole projection failed: {0}")]
    Projection(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
