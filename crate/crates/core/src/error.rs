use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is numerically singular (condition number {condition:.3e})")]
    SingularMatrix { condition: f64 },

    #[error("quadrature did not converge for element pair ({p}, {q}): relative change {relative_change:.3e}")]
    QuadratureNotConverged {
        p: usize,
        q: usize,
        relative_change: f64,
    },

    #[error("degenerate signal subspace: eigenvalue gap {gap:.3e} at index {index}")]
    DegenerateSubspace { index: usize, gap: f64 },

    #[error("no dictionary atom recovered for cascaded column {column}")]
    MissingSupport { column: usize },

    #[error("dictionary needs {required_bytes} bytes, above the {cap_bytes} byte cap")]
    DictionaryTooLarge {
        required_bytes: usize,
        cap_bytes: usize,
    },

    #[error("line search failed after {backtracks} backtracking steps")]
    LineSearchFailed { backtracks: usize },

    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
