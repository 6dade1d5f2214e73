use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} input features, got {actual}")]
    InputWidth { expected: usize, actual: usize },

    #[error("non-finite input feature")]
    NonFiniteInput,

    #[error("class label {0} outside 1..={1}")]
    BadLabel(u8, usize),

    #[error("empty sample set")]
    Empty,

    #[error("invalid training configuration: {0}")]
    Config(String),

    #[error("training diverged: loss {0} at epoch {1}")]
    Diverged(f64, usize),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
