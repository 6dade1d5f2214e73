//! Fully connected FER-class classifier: 16400 CTF features in, four class
//! log-probabilities out.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use eval::{evaluate, predict_all, ConfusionMatrix, Evaluation};
pub use gradcheck::{gradient_check, GradCheckConfig, LayerCheck};
pub use model::{Dense, Mlp, Mode, Standardization, ARCHITECTURE};
pub use train::{train, TrainConfig, TrainReport};
