use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input located by line (and column where the parser knows it).
    #[error("{}:{location}: {message}", path.display())]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{}: record {id}: {reason}", path.display())]
    InvalidRecord {
        path: PathBuf,
        id: String,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model {model}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        model: String,
        expected: usize,
        actual: usize,
        text_index: Option<usize>,
    },

    #[error("vector dimensions differ: {left} vs {right}")]
    VectorDimensions { left: usize, right: usize },

    #[error("zero-norm vector (degenerate embedding)")]
    ZeroNorm,

    #[error("model {model}: no cached embedding for input #{text_index} and backend cannot fetch")]
    CacheMiss { model: String, text_index: usize },

    #[error("model {model}: {message}")]
    Backend {
        model: String,
        message: String,
        text_index: Option<usize>,
    },

    #[error("record {id}: {source}")]
    AtRecord {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("SMO did not converge within {iterations} iterations (KKT gap {gap:.3e}, tolerance {tol:.1e})")]
    NoConvergence {
        iterations: usize,
        gap: f64,
        tol: f64,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Index of the offending input text for embedding errors, when known.
    pub fn text_index(&self) -> Option<usize> {
        match self {
            Error::DimensionMismatch { text_index, .. } | Error::Backend { text_index, .. } => {
                *text_index
            }
            Error::CacheMiss { text_index, .. } => Some(*text_index),
            _ => None,
        }
    }
}
