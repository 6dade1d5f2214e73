//! One-dimensional k-means and FER class boundary derivation.

use rand::Rng;

use crate::dataset::FerClassScheme;
use crate::error::{Error, Result};
use crate::seed::rng_from;

const MAX_ITERATIONS: usize = 500;
pub const DEFAULT_RESTARTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans1d {
    /// Ascending cluster means.
    pub centers: Vec<f64>,
    /// Sum of squared distances to the assigned centre.
    pub inertia: f64,
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &c) in centers.iter().enumerate() {
        let d = (x - c).abs();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn inertia(values: &[f64], centers: &[f64]) -> f64 {
    values
        .iter()
        .map(|&x| {
            let c = centers[nearest(centers, x)];
            (x - c) * (x - c)
        })
        .sum()
}

fn plus_plus_init(values: &[f64], k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centers = vec![values[rng.random_range(0..values.len())]];
    let mut d2: Vec<f64> = values.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            values[rng.random_range(0..values.len())]
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut pick = values.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            values[pick]
        };
        centers.push(next);
        for (d, &x) in d2.iter_mut().zip(values) {
            *d = d.min((x - next).powi(2));
        }
    }
    centers
}

fn lloyd(values: &[f64], mut centers: Vec<f64>) -> Vec<f64> {
    let k = centers.len();
    let mut assign = vec![usize::MAX; values.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (a, &x) in assign.iter_mut().zip(values) {
            let j = nearest(&centers, x);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&a, &x) in assign.iter().zip(values) {
            sums[a] += x;
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            } else {
                // Empty cluster: move it onto the worst-served point.
                let far = values
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        let da = (a - centers[nearest(&centers, a)]).abs();
                        let db = (b - centers[nearest(&centers, b)]).abs();
                        da.total_cmp(&db)
                    })
                    .expect("nonempty");
                centers[j] = far;
            }
        }
    }
    centers.sort_by(f64::total_cmp);
    centers
}

/// Lloyd iterations from `restarts` k-means++ seedings; keeps the lowest inertia.
pub fn kmeans_1d(values: &[f64], k: usize, restarts: usize, seed: u64) -> Result<KMeans1d> {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if k == 0 || distinct.len() < k {
        return Err(Error::TooFewDistinct { needed: k.max(1), got: distinct.len() });
    }
    let mut rng = rng_from(seed);
    let mut best: Option<KMeans1d> = None;
    for _ in 0..restarts.max(1) {
        let centers = lloyd(values, plus_plus_init(values, k, &mut rng));
        let fit = KMeans1d { inertia: inertia(values, &centers), centers };
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Class boundaries from clustering `log10(max(fer, 1 / (2 F)))`: midpoints
/// between adjacent sorted cluster means, mapped back to the FER axis.
pub fn kmeans_boundaries(fers: &[f64], k: usize, frames_per_region: u64, seed: u64) -> Result<FerClassScheme> {
    let floor = 1.0 / (2.0 * frames_per_region.max(1) as f64);
    let logs: Vec<f64> = fers.iter().map(|&f| f.max(floor).log10()).collect();
    let fit = kmeans_1d(&logs, k, DEFAULT_RESTARTS, seed)?;
    let boundaries = fit
        .centers
        .windows(2)
        .map(|w| 10f64.powf(0.5 * (w[0] + w[1])))
        .collect();
    FerClassScheme::new(boundaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::classify_fer;
    use proptest::prelude::*;

    /// Exhaustive optimum over contiguous partitions of sorted data.
    fn brute_force_inertia(values: &[f64], k: usize) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        fn sse(s: &[f64]) -> f64 {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|x| (x - m).powi(2)).sum()
        }
        fn rec(v: &[f64], k: usize) -> f64 {
            if k == 1 {
                return sse(v);
            }
            (1..=v.len() - (k - 1))
                .map(|cut| sse(&v[..cut]) + rec(&v[cut..], k - 1))
                .fold(f64::INFINITY, f64::min)
        }
        rec(&v, k)
    }

    #[test]
    fn recovers_separated_points_exactly() {
        let mut values = Vec::new();
        for c in [-4.0, -2.5, -1.0, 0.0] {
            values.extend(std::iter::repeat_n(c, 7));
        }
        let fit = kmeans_1d(&values, 4, 50, 1).unwrap();
        assert_eq!(fit.centers, vec![-4.0, -2.5, -1.0, 0.0]);
        assert_eq!(fit.inertia, 0.0);
        assert_eq!(brute_force_inertia(&values, 4), 0.0);

        let fers: Vec<f64> = values.iter().map(|l| 10f64.powf(*l)).collect();
        let scheme = kmeans_boundaries(&fers, 4, 20_000, 3).unwrap();
        let expected = [-3.25f64, -1.75, -0.5].map(|l| 10f64.powf(l));
        for (b, e) in scheme.boundaries.iter().zip(expected) {
            assert!((b / e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_distinct_values() {
        assert!(matches!(
            kmeans_1d(&[1.0, 1.0, 2.0, 2.0, 3.0], 4, 5, 0),
            Err(Error::TooFewDistinct { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn zero_fers_are_clamped() {
        let fers = [0.0, 0.0, 0.0, 0.01, 0.012, 0.3, 0.35, 0.9, 1.0];
        let scheme = kmeans_boundaries(&fers, 4, 100, 9).unwrap();
        assert_eq!(scheme.boundaries.len(), 3);
        assert!(scheme.boundaries[0] > 0.005 && scheme.boundaries[0] < 0.01);
    }

    #[test]
    fn same_seed_same_scheme() {
        let fers: Vec<f64> = (1..200).map(|i| (i as f64 / 200.0).powi(3)).collect();
        assert_eq!(
            kmeans_boundaries(&fers, 4, 2000, 5).unwrap(),
            kmeans_boundaries(&fers, 4, 2000, 5).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_brute_force_optimum(values in prop::collection::vec(-5.0f64..0.0, 6..14)) {
            let mut d = values.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            prop_assume!(d.len() >= 4);
            let fit = kmeans_1d(&values, 4, 50, 11).unwrap();
            let best = brute_force_inertia(&values, 4);
            prop_assert!(fit.inertia <= best * (1.0 + 1e-9) + 1e-12, "{} vs {}", fit.inertia, best);
        }

        #[test]
        fn boundaries_scale_with_inputs(values in prop::collection::vec(1e-4f64..1.0, 8..40), log_c in -1.0f64..0.0) {
            let mut d = values.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            prop_assume!(d.len() >= 4);
            let c = 10f64.powf(log_c);
            let a = kmeans_boundaries(&values, 4, 1_000_000, 2).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let b = kmeans_boundaries(&scaled, 4, 1_000_000, 2).unwrap();
            for (x, y) in a.boundaries.iter().zip(&b.boundaries) {
                prop_assert!((y / (x * c) - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn every_fer_gets_exactly_one_class(values in prop::collection::vec(0.0f64..=1.0, 8..60)) {
            let mut d: Vec<f64> = values.iter().map(|f| f.max(5e-4)).collect();
            d.sort_by(f64::total_cmp);
            d.dedup();
            prop_assume!(d.len() >= 4);
            let scheme = kmeans_boundaries(&values, 4, 1000, 4).unwrap();
            for &f in &values {
                let c = classify_fer(f, &scheme);
                prop_assert!((1..=4).contains(&c));
            }
        }
    }
}
