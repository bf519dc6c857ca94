use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("corpus line {line}: record `{id}`: {msg}")]
    Record { line: usize, id: String, msg: String },

    #[error("corpus line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },

    #[error("embeddings line {line}: {msg}")]
    EmbeddingFormat { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("ledger line {line}: {msg}")]
    Ledger { line: usize, msg: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("document `{id}` has length {len}, shorter than filter size {k}")]
    DocumentTooShort { id: String, len: usize, k: usize },

    #[error("non-finite gradient entry in {0}")]
    NonFiniteGradient(&'static str),

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("vocabulary mismatch: checkpoint has {expected} {what}, data has {found}")]
    VocabMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("seed {seed}: {found} successful trials, at least {need} required")]
    InsufficientTrials { seed: u64, found: usize, need: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
