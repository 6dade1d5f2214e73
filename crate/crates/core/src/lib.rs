//! Vehicular channel models, frozen-path channel evaluation and the dataset
//! plumbing shared by the FER labeling and classification stages.

pub mod channel;
pub mod container;
pub mod dataset;
pub mod error;
pub mod gscm;
pub mod kmeans;
pub mod seed;
pub mod source;
pub mod stats;
pub mod tdl;

pub use channel::{
    evaluate_ctf, evaluate_ctf_at, evaluate_uniform_at, CtfGrid, GridSpec, PathKind, PropagationPath,
    StationaryProcess, SPEED_OF_LIGHT,
};
pub use container::{DatasetContainer, FerLabel, Manifest, SampleEntry};
pub use dataset::{classify_fer, region_features, FeatureBlock, FerClassScheme, FEATURE_LEN, NUM_CLASSES};
pub use error::{Error, Result};
pub use source::{Region, RegionSource, SampleSource, SourceRegistry};
