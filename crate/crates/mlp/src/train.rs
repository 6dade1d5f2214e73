use ferlink_core::seed::{mix_seed, rng_from};
use log::info;
use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::model::{Mlp, Mode, Standardization};

const SHUFFLE: u64 = 1;
const DROPOUT_MASK: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many consecutive epochs improving by less than
    /// `min_improvement`.
    pub patience: usize,
    pub min_improvement: f64,
    /// Fit a per-feature input standardization on the training set.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 64,
            seed: 0,
            patience: 5,
            min_improvement: 1e-4,
            standardize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::Config("Adam parameters out of range".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each completed epoch.
    pub epoch_losses: Vec<f64>,
    pub stopped_early: bool,
}

pub(crate) fn zero_based(labels: &[u8], classes: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&c| {
            if c >= 1 && (c as usize) <= classes {
                Ok(c as usize - 1)
            } else {
                Err(Error::BadLabel(c, classes))
            }
        })
        .collect()
}

/// Minibatch Adam on rows of `x` with one-based `labels`. `on_epoch` sees the
/// epoch index and its mean loss.
pub fn train(
    model: &mut Mlp<f32>,
    x: ArrayView2<f32>,
    labels: &[u8],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Empty);
    }
    if x.nrows() != labels.len() {
        return Err(Error::Config(format!("{} samples but {} labels", x.nrows(), labels.len())));
    }
    let targets = zero_based(labels, model.num_classes())?;
    if cfg.standardize {
        model.standardization = Some(Standardization::fit(x));
    }
    let adam = cfg.adam();
    let mut state = AdamState::new(model);
    let mut grads = model.zero_gradients();
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut stalled = 0;

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_from(mix_seed(cfg.seed, &[SHUFFLE, epoch as u64])));
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), idx);
            let tb: Vec<usize> = idx.iter().map(|&i| targets[i]).collect();
            let mask_seed = mix_seed(cfg.seed, &[DROPOUT_MASK, epoch as u64, b as u64]);
            let cache = model.forward_cached(xb.view(), Mode::Train { mask_seed })?;
            let loss = model.backward(&cache, &tb, &mut grads) as f64;
            total += loss * idx.len() as f64;
            adam_step(model, &grads, &mut state, &adam);
        }
        let mean = total / x.nrows() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(mean, epoch));
        }
        info!("epoch {epoch}: loss {mean:.6}");
        on_epoch(epoch, mean);
        if let Some(&prev) = losses.last() {
            stalled = if prev - mean < cfg.min_improvement { stalled + 1 } else { 0 };
        }
        losses.push(mean);
        if stalled >= cfg.patience {
            return Ok(TrainReport { epoch_losses: losses, stopped_early: true });
        }
    }
    Ok(TrainReport { epoch_losses: losses, stopped_early: false })
}
