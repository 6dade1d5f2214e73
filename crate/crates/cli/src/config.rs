//! Run configuration: one JSON document covering every stage.

use std::fs;
use std::path::Path;

use ferlink_core::source::GscmSourceConfig;
use ferlink_core::tdl::TdlRanges;
use ferlink_core::{FerClassScheme, GridSpec};
use ferlink_mlp::TrainConfig;
use ferlink_phy::PhyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every stage derives its streams from it.
    pub seed: u64,
    pub grid: GridSpec,
    pub gscm: GscmSourceConfig,
    pub tdl: TdlRanges,
    pub phy: PhyConfig,
    pub train: TrainConfig,
    pub class_scheme: FerClassScheme,
    /// Share of every source held out for testing.
    pub test_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSpec::default(),
            gscm: GscmSourceConfig::default(),
            tdl: TdlRanges::default(),
            phy: PhyConfig::default(),
            train: TrainConfig::default(),
            class_scheme: FerClassScheme::default(),
            test_fraction: 0.3,
        }
    }
}

/// Hex SHA-256 of the compact JSON serialization of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Defaults when `path` is `None`, then the seed override.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.gscm.scenario.validate()?;
        self.tdl.validate()?;
        self.phy.validate()?;
        self.train.validate()?;
        self.class_scheme.validate()?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Hash of the whole resolved configuration.
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    /// Hash of the fields that determine the channel regions.
    pub fn generation_hash(&self) -> String {
        hash_json(&(self.seed, &self.grid, &self.gscm, &self.tdl))
    }

    pub fn phy_hash(&self) -> String {
        hash_json(&(self.seed, &self.phy))
    }

    /// Training seed: the configured one mixed with the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: ferlink_core::seed::mix_seed(self.seed, &[TRAIN_STREAM, self.train.seed]),
            ..self.train.clone()
        }
    }
}

const TRAIN_STREAM: u64 = 0x0074_7261_696e;
