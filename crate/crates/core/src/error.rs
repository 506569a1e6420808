use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("landmark index {index} out of range (have {len})")]
    InvalidLandmark { index: usize, len: usize },

    #[error("recognition scope is empty")]
    EmptyScope,

    #[error("need at least 2 correspondences, got {0}")]
    InsufficientCorrespondences(usize),

    #[error("all RANSAC hypotheses were degenerate")]
    DegenerateSamples,

    #[error("robot pose ({x:.2}, {y:.2}) is inside a wall or outside the world")]
    RobotInWall { x: f64, y: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than a failing run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation { .. } | Error::Config(_) | Error::Io { .. }
        )
    }
}
