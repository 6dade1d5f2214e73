use ndarray::{NdFloat, Zip};

use crate::model::{cast, Dense, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub m: Vec<Dense<F>>,
    pub v: Vec<Dense<F>>,
    pub step: u64,
}

impl<F: NdFloat> AdamState<F> {
    pub fn new(model: &Mlp<F>) -> Self {
        Self { m: model.zero_gradients(), v: model.zero_gradients(), step: 0 }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step<F: NdFloat>(model: &mut Mlp<F>, grads: &[Dense<F>], state: &mut AdamState<F>, cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (cast::<F>(cfg.beta1), cast::<F>(cfg.beta2));
    let (c1, c2) = (cast::<F>(1.0 - cfg.beta1), cast::<F>(1.0 - cfg.beta2));
    // lr * m_hat / (sqrt(v_hat) + eps) with the corrections folded in.
    let step_size = cast::<F>(cfg.learning_rate / (1.0 - cfg.beta1.powi(t)));
    let inv_sqrt_c2 = cast::<F>(1.0 / (1.0 - cfg.beta2.powi(t)).sqrt());
    let eps = cast::<F>(cfg.epsilon);

    for (((layer, g), m), v) in model.layers.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let update = |p: &mut F, &g: &F, m: &mut F, v: &mut F| {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            *p -= step_size * *m / ((*v).sqrt() * inv_sqrt_c2 + eps);
        };
        Zip::from(&mut layer.weight).and(&g.weight).and(&mut m.weight).and(&mut v.weight).for_each(update);
        Zip::from(&mut layer.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(update);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Mlp<f64> {
        Mlp::new(&[3, 2, 2], 0.0, 0, 4)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = model();
        let before = m.clone();
        let mut s = AdamState::new(&m);
        let g = m.zero_gradients();
        for _ in 0..10 {
            adam_step(&mut m, &g, &mut s, &AdamConfig::default());
        }
        assert_eq!(m, before);
    }

    #[test]
    fn constant_gradient_steps_at_learning_rate() {
        // With g constant, m_hat = g and v_hat = g^2 exactly, so each step is
        // lr * g / (|g| + eps).
        let mut m = model();
        let mut s = AdamState::new(&m);
        let mut g = m.zero_gradients();
        g[0].weight.fill(0.3);
        g[1].bias.fill(-2.0);
        let cfg = AdamConfig::default();
        for _ in 0..200 {
            let before = m.clone();
            adam_step(&mut m, &g, &mut s, &cfg);
            let dw = before.layers[0].weight[[0, 0]] - m.layers[0].weight[[0, 0]];
            let db = m.layers[1].bias[0] - before.layers[1].bias[0];
            let expected = cfg.learning_rate * 0.3 / (0.3 + cfg.epsilon);
            assert!((dw / expected - 1.0).abs() < 1e-9, "{dw}");
            assert!((db / cfg.learning_rate - 1.0).abs() < 1e-7, "{db}");
            assert_eq!(before.layers[0].bias, m.layers[0].bias);
        }
    }
}
