//! Orchestration of the FER-classification pipeline: region generation,
//! link-level labeling, classifier training, evaluation and prediction.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use pipeline::{evaluate, generate, kmeans_classes, label, predict, train, Metrics, Subset};
