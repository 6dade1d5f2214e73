//! Central-difference verification of the analytic gradients.

use ferlink_core::seed::rng_from;
use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{nll_loss, ForwardCache, Mlp, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub weight_probes: usize,
    pub bias_probes: usize,
    pub step: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { weight_probes: 80, bias_probes: 20, step: 1e-5, floor: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub probes: usize,
    pub max_relative_error: f64,
    /// Coordinates redrawn because perturbations both ways flipped a ReLU.
    pub kinks_skipped: usize,
}

fn activation_pattern(cache: &ForwardCache<f64>) -> Vec<bool> {
    cache.inputs[1..].iter().flat_map(|a| a.iter().map(|&v| v > 0.0)).collect()
}

fn slot(m: &mut Mlp<f64>, layer: usize, is_weight: bool, r: usize, c: usize) -> &mut f64 {
    if is_weight {
        &mut m.layers[layer].weight[[r, c]]
    } else {
        &mut m.layers[layer].bias[r]
    }
}

/// Compare analytic and numerical gradients of the training loss (dropout mask
/// fixed by `mask_seed`) at randomly drawn coordinates of every layer.
pub fn gradient_check(
    model: &mut Mlp<f64>,
    x: ArrayView2<f64>,
    targets: &[usize],
    mask_seed: u64,
    cfg: &GradCheckConfig,
) -> Result<Vec<LayerCheck>> {
    let mode = Mode::Train { mask_seed };
    let base = model.forward_cached(x, mode)?;
    let pattern = activation_pattern(&base);
    let base_loss = nll_loss(&base.log_probs, targets);
    let mut grads = model.zero_gradients();
    model.backward(&base, targets, &mut grads);
    drop(base);

    let mut rng = rng_from(cfg.seed);
    let mut report = Vec::with_capacity(model.layers.len());
    for layer in 0..model.layers.len() {
        let (rows, cols) = model.layers[layer].weight.dim();
        let mut worst: f64 = 0.0;
        let mut skipped = 0;
        let mut done = 0;
        let wanted = cfg.weight_probes + cfg.bias_probes;
        let mut attempts = 0;
        while done < wanted && attempts < 20 * wanted {
            attempts += 1;
            let is_weight = done < cfg.weight_probes;
            let r = rng.random_range(0..rows);
            let c = rng.random_range(0..cols);
            let original = *slot(model, layer, is_weight, r, c);
            let mut eval = |value: f64| -> Result<(f64, bool)> {
                *slot(model, layer, is_weight, r, c) = value;
                let cache = model.forward_cached(x, mode)?;
                Ok((nll_loss(&cache.log_probs, targets), activation_pattern(&cache) == pattern))
            };
            let (plus, same_plus) = eval(original + cfg.step)?;
            let (minus, same_minus) = eval(original - cfg.step)?;
            *slot(model, layer, is_weight, r, c) = original;
            // Near a ReLU kink fall back to the one-sided difference that stays
            // on the current linear piece.
            let numeric = match (same_plus, same_minus) {
                (true, true) => (plus - minus) / (2.0 * cfg.step),
                (true, false) => (plus - base_loss) / cfg.step,
                (false, true) => (base_loss - minus) / cfg.step,
                (false, false) => {
                    skipped += 1;
                    continue;
                }
            };
            let analytic = if is_weight { grads[layer].weight[[r, c]] } else { grads[layer].bias[r] };
            let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(cfg.floor);
            worst = worst.max(err);
            done += 1;
        }
        report.push(LayerCheck { layer, probes: done, max_relative_error: worst, kinks_skipped: skipped });
    }
    Ok(report)
}
