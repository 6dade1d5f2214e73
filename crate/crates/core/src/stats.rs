//! Small statistical helpers used by the calibration harnesses and the
//! property checks: analytic error functions, goodness of fit, interval bounds.

use std::f64::consts::{PI, TAU};

use statrs::function::erf::erfc;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Theoretical bit error rate of Gray-mapped QPSK (or BPSK) over AWGN.
pub fn qpsk_awgn_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Rayleigh CDF with `E[r^2] = mean_power`.
pub fn rayleigh_cdf(r: f64, mean_power: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        1.0 - (-r * r / mean_power).exp()
    }
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `sqrt(-ln(alpha/2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Moment-based Rician K estimator from complex fading samples:
/// `K = sqrt(2 m2^2 - m4) / (m2 - sqrt(2 m2^2 - m4))` with `m_i = E|h|^i`.
pub fn rician_k_moment(samples: &[num_complex::Complex64]) -> f64 {
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|h| h.norm_sqr()).sum::<f64>() / n;
    let m4 = samples.iter().map(|h| h.norm_sqr().powi(2)).sum::<f64>() / n;
    let disc = (2.0 * m2 * m2 - m4).max(0.0).sqrt();
    disc / (m2 - disc)
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Two-proportion z-test at normal quantile `z`: do `k1/n1` and `k2/n2` agree?
pub fn proportions_agree(k1: u64, n1: u64, k2: u64, n2: u64, z: f64) -> bool {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let diff = (k1 as f64 / n1f - k2 as f64 / n2f).abs();
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    diff <= z * se + f64::EPSILON
}

/// Standard normal 97.5% quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Remove 2pi jumps from a sequence of wrapped phases.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= TAU;
            } else if d < -PI {
                offset += TAU;
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// Least-squares line `y = slope * x + intercept`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
