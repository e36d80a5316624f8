use std::path::PathBuf;

use thiserror::Error;

use crate::model::CbsdId;
use crate::oracle::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel index {channel} out of range for {total} channels")]
    InvalidChannel { channel: usize, total: usize },

    #[error("unknown CBSD {0}")]
    UnknownCbsd(CbsdId),

    #[error("CBSD {0} is not a GAA")]
    NotAGaa(CbsdId),

    #[error("slot mismatch: expected {expected}, got {found}")]
    SlotMismatch { expected: u32, found: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("event error at slot {slot}: {message}")]
    Event { slot: u32, message: String },

    #[error("instance too large for exhaustive search: {0}")]
    Capacity(String),

    #[error("{} constraint violation(s) at slot {slot}; first: {}", .violations.len(), .violations[0])]
    Violations { slot: u32, violations: Vec<Violation> },

    #[error("{path}: {message}")]
    Scenario { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
