use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid store header: {0}")]
    InvalidHeader(String),

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("slot out of range: sample {sample} (N={num_samples}), epoch {epoch} (E={num_epochs})")]
    OutOfRange {
        sample: u64,
        epoch: u16,
        num_samples: u64,
        num_epochs: u16,
    },

    #[error("missing record: sample {sample}, epoch {epoch} was never written")]
    MissingRecord { sample: u64, epoch: u16 },

    #[error("top-k {k} exceeds class count {classes}")]
    TopKTooLarge { k: usize, classes: usize },

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("config hash mismatch: store was extracted with {expected}, got {actual}")]
    ConfigMismatch { expected: String, actual: String },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad arguments or mismatched inputs rather than
    /// runtime failures. The CLI maps these to its usage exit code.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidHeader(_)
                | Error::TopKTooLarge { .. }
                | Error::InvalidConfig(_)
                | Error::ConfigMismatch { .. }
                | Error::OutOfRange { .. }
        )
    }
}
