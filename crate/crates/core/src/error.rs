use std::path::PathBuf;

use crate::embed::EmbedError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// The caller asked for something inconsistent (bad thresholds, bad ratio).
    Config,
    /// The input data does not satisfy a precondition.
    Data,
    /// An external embedding provider misbehaved.
    Protocol,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line count mismatch: source has {source_lines} lines, target has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("{path}: line {line} is empty")]
    EmptyLine { path: PathBuf, line: usize },

    #[error("{path}: line {line} must contain exactly one TAB")]
    MalformedTsv { path: PathBuf, line: usize },

    #[error("invalid token {0:?}: tokens are non-empty and contain no whitespace")]
    InvalidToken(String),

    #[error("duplicate sentence pair id {0}")]
    DuplicateId(u64),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "no target word appears at least {min_train_count} times in training and \
         {min_test_count} times in test"
    )]
    NoQualifyingWords {
        min_train_count: usize,
        min_test_count: usize,
    },

    #[error("cannot sample {requested} references for {word:?}: pool holds {pool}")]
    PoolTooSmall {
        word: String,
        pool: usize,
        requested: usize,
    },

    #[error("no source translation known for {0:?}")]
    MissingLexiconEntry(String),

    #[error("token {0:?} looks like a subword unit; augmentation expects word-tokenized text")]
    SubwordInput(String),

    #[error("{word:?} has {available} reference sentences, {needed} required")]
    InsufficientReferences {
        word: String,
        available: usize,
        needed: usize,
    },

    #[error("{word:?} reference #{reference} has {available} synthetic pairs, {needed} required")]
    InsufficientSynthetics {
        word: String,
        reference: usize,
        available: usize,
        needed: usize,
    },

    #[error("padding needs {needed} random pairs but the filtered corpus holds {available}")]
    InsufficientPadding { available: usize, needed: usize },

    #[error("{0:?} does not occur in any reference sentence")]
    WordAbsent(String),

    #[error("hypotheses ({hypotheses}) and references ({references}) differ in length")]
    EvalLengthMismatch { hypotheses: usize, references: usize },

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) => ErrorCategory::Config,
            Error::Embed(e) if e.is_protocol() => ErrorCategory::Protocol,
            _ => ErrorCategory::Data,
        }
    }
}
