use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid propagation path: {0}")]
    InvalidPath(String),

    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("stationary process has no propagation paths")]
    EmptyProcess,

    #[error("delay of path {path} becomes negative at t = {time:.6e} s (extension horizon exceeded)")]
    NegativeDelay { path: usize, time: f64 },

    #[error("invalid snapshot range {start}..{end}")]
    InvalidRange { start: usize, end: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("trajectory too short: {needed:.3} s of travel required, {available:.3} s available")]
    TrajectoryTooShort { needed: f64, available: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty parameter range `{0}`")]
    EmptyRange(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("k-means needs at least {needed} distinct values, got {got}")]
    TooFewDistinct { needed: usize, got: usize },

    #[error("invalid class scheme: {0}")]
    InvalidScheme(String),

    #[error("unknown region source `{0}`")]
    UnknownSource(String),

    #[error("malformed container {path}: {reason}")]
    Container { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
