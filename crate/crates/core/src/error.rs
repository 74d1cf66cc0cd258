use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed array file: bad magic, unknown dtype, zero dims, length mismatch.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Malformed manifest line (duplicate id, missing field, bad JSON).
    #[error("manifest error at {path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("budget error: {0}")]
    Budget(String),

    #[error("missing artifacts for {n} tile(s): {listed}", n = .tile_ids.len(), listed = summarize_ids(.tile_ids))]
    MissingArtifacts { tile_ids: Vec<String> },

    #[error("pool exhausted: {0}")]
    PoolExhausted(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn manifest(
        path: impl Into<PathBuf>,
        line: usize,
        reason: impl Into<String>,
    ) -> Self {
        Error::Manifest {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}

fn summarize_ids(ids: &[String]) -> String {
    const SHOWN: usize = 8;
    if ids.len() <= SHOWN {
        ids.join(", ")
    } else {
        format!(
            "{}, ... ({} more)",
            ids[..SHOWN].join(", "),
            ids.len() - SHOWN
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
