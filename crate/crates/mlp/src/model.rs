//! Fully connected ReLU network with one dropout layer and a log-softmax head.

use ferlink_core::seed::rng_from;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat, Zip};
use num_traits::NumCast;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths from input to output.
pub const ARCHITECTURE: [usize; 7] = [16_400, 2048, 1024, 1024, 512, 128, 4];
pub const DROPOUT: f64 = 0.05;
/// Dropout acts on the activation of this (zero-based) layer.
pub const DROPOUT_AFTER: usize = 3;

#[inline]
pub(crate) fn cast<F: NdFloat>(x: f64) -> F {
    <F as NumCast>::from(x).expect("representable")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    /// `out x in`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: NdFloat> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn num_parameters(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Per-feature input standardization `(x - mean) / std`, fitted on training
/// data. Constant features keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: ArrayView2<f32>) -> Self {
        let n = x.nrows() as f64;
        let (mean, std) = x
            .columns()
            .into_iter()
            .map(|c| {
                let mean = c.iter().map(|&v| v as f64).sum::<f64>() / n;
                let var = c.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
                (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
            })
            .unzip();
        Self { mean, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    fn apply<F: NdFloat>(&self, x: ArrayView2<F>) -> Array2<F> {
        let mean = Array1::from_iter(self.mean.iter().map(|&m| cast::<F>(m)));
        let inv = Array1::from_iter(self.std.iter().map(|&s| cast::<F>(1.0 / s)));
        let mut a = &x - &mean;
        a *= &inv;
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, mask drawn from the given seed.
    Train { mask_seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
    pub dropout: f64,
    pub dropout_after: usize,
    pub standardization: Option<Standardization>,
}

/// Intermediate values of a training-mode forward pass.
pub struct ForwardCache<F> {
    /// Input of each layer (after standardization, activation and dropout).
    pub inputs: Vec<Array2<F>>,
    /// Dropout mask including the `1 / keep` scale, if dropout was active.
    pub mask: Option<Array2<F>>,
    pub log_probs: Array2<F>,
}

impl<F: NdFloat> Mlp<F> {
    /// He-uniform weights `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero biases.
    pub fn new(widths: &[usize], dropout: f64, dropout_after: usize, seed: u64) -> Self {
        assert!(widths.len() >= 2, "need at least one layer");
        let mut rng = rng_from(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((w[1], w[0]), || cast(rng.random_range(-bound..bound)));
                Dense { weight, bias: Array1::zeros(w[1]) }
            })
            .collect();
        Self { layers, dropout, dropout_after, standardization: None }
    }

    /// The 16400-2048-1024-1024-512-128-4 classifier.
    pub fn paper(seed: u64) -> Self {
        Self::new(&ARCHITECTURE, DROPOUT, DROPOUT_AFTER, seed)
    }

    pub fn num_inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("nonempty").outputs()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(Dense::num_parameters).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    pub fn cast<G: NdFloat>(&self) -> Mlp<G> {
        let c = |v: &F| cast::<G>(v.to_f64().expect("finite"));
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { weight: l.weight.map(c), bias: l.bias.map(c) })
                .collect(),
            dropout: self.dropout,
            dropout_after: self.dropout_after,
            standardization: self.standardization.clone(),
        }
    }

    fn check_input(&self, x: &ArrayView2<F>) -> Result<()> {
        if x.ncols() != self.num_inputs() {
            return Err(Error::InputWidth { expected: self.num_inputs(), actual: x.ncols() });
        }
        if let Some(s) = &self.standardization {
            if s.len() != x.ncols() || s.std.len() != x.ncols() {
                return Err(Error::InputWidth { expected: x.ncols(), actual: s.len() });
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    fn dropout_mask(&self, rows: usize, cols: usize, seed: u64) -> Array2<F> {
        let keep = 1.0 - self.dropout;
        let scale = cast::<F>(1.0 / keep);
        let mut rng = rng_from(seed);
        Array2::from_shape_simple_fn((rows, cols), || {
            if rng.random_bool(keep) {
                scale
            } else {
                F::zero()
            }
        })
    }

    /// Forward pass over a batch (one sample per row), keeping what the
    /// backward pass needs.
    pub fn forward_cached(&self, x: ArrayView2<F>, mode: Mode) -> Result<ForwardCache<F>> {
        self.check_input(&x)?;
        let mut a = match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_owned(),
        };
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut mask = None;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight.t());
            z += &layer.bias;
            inputs.push(a);
            if i < last {
                z.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
                if i == self.dropout_after && self.dropout > 0.0 {
                    if let Mode::Train { mask_seed } = mode {
                        let m = self.dropout_mask(z.nrows(), z.ncols(), mask_seed);
                        z *= &m;
                        mask = Some(m);
                    }
                }
            }
            a = z;
        }
        log_softmax_rows(&mut a);
        Ok(ForwardCache { inputs, mask, log_probs: a })
    }

    /// Log class probabilities, one row per sample.
    pub fn forward(&self, x: ArrayView2<F>, mode: Mode) -> Result<Array2<F>> {
        Ok(self.forward_cached(x, mode)?.log_probs)
    }

    /// Gradients of the mean negative log-likelihood of `targets` (zero-based)
    /// into `grads`, which must have this model's shapes. Returns the loss.
    pub fn backward(&self, cache: &ForwardCache<F>, targets: &[usize], grads: &mut [Dense<F>]) -> F {
        let batch = targets.len();
        let inv_b = cast::<F>(1.0 / batch as f64);
        let mut loss = F::zero();
        // d loss / d logits = (softmax - onehot) / B
        let mut delta = cache.log_probs.mapv(|v| v.exp());
        for (r, &t) in targets.iter().enumerate() {
            loss -= cache.log_probs[[r, t]];
            delta[[r, t]] -= F::one();
        }
        delta *= inv_b;

        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            general_mat_mul(F::one(), &delta.t(), input, F::zero(), &mut grads[i].weight);
            grads[i].bias.assign(&delta.sum_axis(Axis(0)));
            if i == 0 {
                break;
            }
            let mut next = delta.dot(&self.layers[i].weight);
            // `input` is the activation of layer i - 1: positive exactly where
            // the ReLU was active (and, for the dropout layer, the unit kept).
            if i - 1 == self.dropout_after {
                if let Some(mask) = &cache.mask {
                    Zip::from(&mut next).and(mask).for_each(|d, &m| *d *= m);
                }
            }
            Zip::from(&mut next).and(input).for_each(|d, &a| {
                if a <= F::zero() {
                    *d = F::zero();
                }
            });
            delta = next;
        }
        loss * inv_b
    }

    pub fn zero_gradients(&self) -> Vec<Dense<F>> {
        self.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect()
    }

    /// Argmax class per row (one-based), ties toward the lower class.
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Vec<u8>> {
        Ok(self.forward(x, Mode::Eval)?.rows().into_iter().map(|r| argmax(r.iter().copied()) as u8 + 1).collect())
    }
}

pub(crate) fn argmax<F: PartialOrd>(values: impl Iterator<Item = F>) -> usize {
    let mut best = 0;
    let mut best_v = None;
    for (i, v) in values.enumerate() {
        if best_v.as_ref().is_none_or(|b| v > *b) {
            best = i;
            best_v = Some(v);
        }
    }
    best
}

/// `z - max - ln sum exp(z - max)` per row.
pub fn log_softmax_rows<F: NdFloat>(z: &mut Array2<F>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = row.iter().map(|&v| (v - max).exp()).fold(F::zero(), |a, b| a + b).ln() + max;
        row.mapv_inplace(|v| v - lse);
    }
}

/// Mean negative log-likelihood of zero-based `targets`.
pub fn nll_loss<F: NdFloat>(log_probs: &Array2<F>, targets: &[usize]) -> F {
    let total = targets
        .iter()
        .enumerate()
        .fold(F::zero(), |acc, (r, &t)| acc - log_probs[[r, t]]);
    total / cast(targets.len() as f64)
}
