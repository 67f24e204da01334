use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input that cannot produce a meaningful network (empty text, too few paragraphs, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("annotation sidecar line {line}: {message}")]
    Sidecar { line: usize, message: String },

    #[error("annotation sidecar has {records} records but the book has {paragraphs} paragraphs")]
    SidecarLength { records: usize, paragraphs: usize },

    #[error("tf-idf vocabulary is empty")]
    EmptyVocabulary,

    #[error("network file line {line}: {message}")]
    NetworkFormat { line: usize, message: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid chapter pattern: {0}")]
    Pattern(#[from] regex::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
