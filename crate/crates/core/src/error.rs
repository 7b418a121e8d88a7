use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown verb base `{0}`")]
    UnknownVerb(String),

    #[error("llm request failed after {attempts} attempt(s): {msg}")]
    LlmRetriable { attempts: usize, msg: String },

    #[error("augmentation failed: {0}")]
    AugmentationFailed(String),

    #[error("no augmentations could be produced for class `{class}` ({histogram})")]
    NothingProduced { class: String, histogram: String },

    #[error("training diverged at epoch {epoch}: objective = {value}")]
    Divergence { epoch: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
