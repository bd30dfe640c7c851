use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("word id {word} outside vocabulary of size {vocab_size}")]
    UnknownWord { word: u32, vocab_size: usize },

    #[error("{prior} prior is not supported by the document model")]
    UnsupportedPrior { prior: &'static str },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus {0} contains no documents")]
    EmptyCorpus(PathBuf),

    #[error("{path}: line {line} is not valid UTF-8")]
    InvalidUtf8 { path: PathBuf, line: usize },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("split leaves the {side} side empty")]
    EmptySplit { side: &'static str },

    #[error("checkpoint was written for corpus {expected}, got {actual}")]
    CorpusMismatch { expected: String, actual: String },

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("{what}: {got} exceeds the enumeration limit of {limit}")]
    TooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },
}
