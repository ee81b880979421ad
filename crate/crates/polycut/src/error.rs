//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("plane detection: {0}")]
    Detection(String),

    #[error("partitioning: {0}")]
    Partition(String),

    #[error("occupancy provider failed on cell {cell}: {reason}")]
    Occupancy { cell: usize, reason: String },

    #[error("surface extraction: {0}")]
    Extraction(String),

    #[error("scan: {0}")]
    Scan(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
