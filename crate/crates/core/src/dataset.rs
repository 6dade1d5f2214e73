//! From channel grids and FER labels to network-ready samples.

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{evaluate_ctf, CtfGrid, GridSpec, StationaryProcess};
use crate::error::{Error, Result};
use crate::seed::{domain, mix_seed, rng_from};
use crate::source::SampleSource;

/// Snapshots per feature block.
pub const FEATURE_SNAPSHOTS: usize = 200;
/// Centre bins kept by [`resample_ctf`]: 10 MHz at 250 kHz spacing, inclusive.
pub const FEATURE_BINS: usize = 41;
/// Bin spacing the feature layout assumes, Hz.
pub const FEATURE_SPACING: f64 = 250e3;
/// Flattened feature length `2 * 200 * 41`.
pub const FEATURE_LEN: usize = 2 * FEATURE_SNAPSHOTS * FEATURE_BINS;
pub const NUM_CLASSES: usize = 4;

/// Right-closed FER intervals `(0, b1], (b1, b2], ..., (b_last, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FerClassScheme {
    pub boundaries: Vec<f64>,
}

impl Default for FerClassScheme {
    fn default() -> Self {
        Self {
            boundaries: vec![5e-4, 1e-1, 5e-1],
        }
    }
}

impl FerClassScheme {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        let scheme = Self { boundaries };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(Error::InvalidScheme("need at least one boundary".into()));
        }
        if !self.boundaries.iter().all(|&b| b > 0.0 && b < 1.0) {
            return Err(Error::InvalidScheme("boundaries must lie in (0, 1)".into()));
        }
        if !self.boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidScheme("boundaries must be strictly ascending".into()));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.boundaries.len() + 1
    }
}

/// 1-based class of `fer`. Zero failures count as class 1.
pub fn classify_fer(fer: f64, scheme: &FerClassScheme) -> u8 {
    let idx = scheme.boundaries.iter().take_while(|&&b| fer > b).count();
    (idx + 1) as u8
}

/// Keep the 41 centre bins (10 MHz) of a wideband grid at 250 kHz spacing.
pub fn resample_ctf(grid: &CtfGrid) -> Result<CtfGrid> {
    let n = grid.num_subcarriers();
    if (grid.spec.subcarrier_spacing - FEATURE_SPACING).abs() > 1e-6 * FEATURE_SPACING
        || n < FEATURE_BINS
        || !(n - FEATURE_BINS).is_multiple_of(2)
        || n != grid.spec.num_subcarriers
    {
        return Err(Error::Dimension {
            expected: format!("odd number (>= {FEATURE_BINS}) of bins at {FEATURE_SPACING} Hz"),
            actual: format!("{n} bins at {} Hz", grid.spec.subcarrier_spacing),
        });
    }
    let first = (n - FEATURE_BINS) / 2;
    Ok(CtfGrid {
        spec: grid.spec.narrowed(FEATURE_BINS)?,
        first_snapshot: grid.first_snapshot,
        values: grid
            .values
            .slice(ndarray::s![.., first..first + FEATURE_BINS])
            .to_owned(),
    })
}

/// Real/imaginary planes of a 200 x 41 grid, flattened plane-major, then time,
/// then frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    data: Vec<f32>,
}

impl FeatureBlock {
    pub fn from_flat(data: Vec<f32>) -> Result<Self> {
        if data.len() != FEATURE_LEN {
            return Err(Error::Dimension {
                expected: FEATURE_LEN.to_string(),
                actual: data.len().to_string(),
            });
        }
        Ok(Self { data })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// `plane` 0 is the real part, 1 the imaginary part.
    pub fn get(&self, plane: usize, snapshot: usize, bin: usize) -> f32 {
        self.data[flat_index(plane, snapshot, bin)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rebuild the complex grid (at single precision).
    pub fn to_values(&self) -> Array2<Complex64> {
        Array2::from_shape_fn((FEATURE_SNAPSHOTS, FEATURE_BINS), |(m, k)| {
            Complex64::new(self.get(0, m, k) as f64, self.get(1, m, k) as f64)
        })
    }
}

#[inline]
pub fn flat_index(plane: usize, snapshot: usize, bin: usize) -> usize {
    (plane * FEATURE_SNAPSHOTS + snapshot) * FEATURE_BINS + bin
}

pub fn to_feature_block(grid: &CtfGrid) -> Result<FeatureBlock> {
    if grid.values.dim() != (FEATURE_SNAPSHOTS, FEATURE_BINS) {
        return Err(Error::Dimension {
            expected: format!("{FEATURE_SNAPSHOTS}x{FEATURE_BINS}"),
            actual: format!("{}x{}", grid.values.nrows(), grid.values.ncols()),
        });
    }
    let mut data = vec![0f32; FEATURE_LEN];
    for ((m, k), h) in grid.values.indexed_iter() {
        data[flat_index(0, m, k)] = h.re as f32;
        data[flat_index(1, m, k)] = h.im as f32;
    }
    Ok(FeatureBlock { data })
}

/// Feature block of a region: the first 200 snapshots on the 41 centre bins.
pub fn region_features(process: &StationaryProcess) -> Result<FeatureBlock> {
    let narrow = process.with_spec(feature_grid_spec(process.spec())?)?;
    to_feature_block(&evaluate_ctf(&narrow, 0..FEATURE_SNAPSHOTS)?)
}

/// The 41-bin feature grid matching `spec` (same carrier and time axis).
pub fn feature_grid_spec(spec: &GridSpec) -> Result<GridSpec> {
    spec.narrowed(FEATURE_BINS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureBlock,
    pub fer: f64,
    pub class_label: u8,
    pub source: SampleSource,
    pub region_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle stratified by source. The test set has `round(fraction * n)`
/// samples, apportioned over sources by largest remainder so that each source
/// is within one sample of its proportional share.
pub fn split_dataset(sources: &[SampleSource], fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if sources.len() < 2 {
        return Err(Error::InvalidConfig("split needs at least two samples".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig("test fraction must be in [0, 1]".into()));
    }
    let mut groups: std::collections::BTreeMap<SampleSource, Vec<usize>> = Default::default();
    for (i, &s) in sources.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let total_test = (fraction * sources.len() as f64).round() as usize;
    let mut quota: Vec<(SampleSource, usize, f64)> = groups
        .iter()
        .map(|(&s, idx)| {
            let exact = fraction * idx.len() as f64;
            (s, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quota.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| quota[b].2.total_cmp(&quota[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(total_test.saturating_sub(assigned)) {
        quota[i].1 += 1;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (s, n_test, _) in quota {
        let mut idx = groups.remove(&s).unwrap_or_default();
        let mut rng = rng_from(mix_seed(seed, &[domain::SPLIT, s as u64]));
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{evaluate_ctf, PathKind, PropagationPath, StationaryProcess};
    use proptest::prelude::*;

    #[test]
    fn classify_examples() {
        let s = FerClassScheme::default();
        assert_eq!(classify_fer(3e-4, &s), 1);
        assert_eq!(classify_fer(0.2, &s), 3);
        assert_eq!(classify_fer(0.7, &s), 4);
        assert_eq!(classify_fer(0.1, &s), 2);
        assert_eq!(classify_fer(5e-4, &s), 1);
        assert_eq!(classify_fer(0.5, &s), 3);
        assert_eq!(classify_fer(1.0, &s), 4);
        assert_eq!(classify_fer(0.0, &s), 1);
    }

    #[test]
    fn scheme_validation() {
        assert!(FerClassScheme::new(vec![0.1, 0.05]).is_err());
        assert!(FerClassScheme::new(vec![0.0, 0.5]).is_err());
        assert!(FerClassScheme::new(vec![]).is_err());
        assert_eq!(FerClassScheme::default().num_classes(), 4);
    }

    fn index_grid() -> CtfGrid {
        let spec = GridSpec::default();
        let values = Array2::from_shape_fn((3, 601), |(_, c)| Complex64::new(c as f64 - 300.0, 0.0));
        CtfGrid { spec, first_snapshot: 0, values }
    }

    #[test]
    fn resample_selects_centre_bins_in_order() {
        let out = resample_ctf(&index_grid()).unwrap();
        assert_eq!(out.num_subcarriers(), 41);
        for (c, v) in out.values.row(1).iter().enumerate() {
            assert_eq!(v.re, c as f64 - 20.0);
        }
    }

    #[test]
    fn resample_flat_and_energy() {
        let p = StationaryProcess::new(
            vec![PropagationPath::new(0.8, 0.3, 0.0, 0.0, PathKind::Los).unwrap()],
            GridSpec::default(),
        )
        .unwrap();
        let g = evaluate_ctf(&p, 0..2).unwrap();
        let r = resample_ctf(&g).unwrap();
        let c = g.values[[0, 0]];
        assert!(r.values.iter().all(|v| *v == c));

        let g = index_grid();
        let r = resample_ctf(&g).unwrap();
        for (a, b) in g.values.rows().into_iter().zip(r.values.rows()) {
            let ea: f64 = a.iter().map(|v| v.norm_sqr()).sum();
            let eb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
            assert!(eb <= ea);
        }
    }

    #[test]
    fn resample_rejects_wrong_width() {
        let mut g = index_grid();
        g.spec.subcarrier_spacing = 156.25e3;
        assert!(resample_ctf(&g).is_err());
        let spec = GridSpec { num_subcarriers: 40, ..GridSpec::default() };
        let g = CtfGrid { spec, first_snapshot: 0, values: Array2::zeros((2, 40)) };
        assert!(resample_ctf(&g).is_err());
    }

    fn feature_sized(f: impl Fn(usize, usize) -> Complex64) -> CtfGrid {
        CtfGrid {
            spec: GridSpec::default().narrowed(41).unwrap(),
            first_snapshot: 0,
            values: Array2::from_shape_fn((200, 41), |(m, k)| f(m, k)),
        }
    }

    #[test]
    fn feature_block_layout() {
        let real = feature_sized(|m, k| Complex64::new((m * 41 + k) as f64, 0.0));
        let fb = to_feature_block(&real).unwrap();
        assert_eq!(fb.as_slice().len(), 16400);
        assert!(fb.as_slice()[8200..].iter().all(|&v| v == 0.0));
        assert_eq!(fb.get(0, 3, 7), (3 * 41 + 7) as f32);
        assert_eq!(fb.as_slice()[3 * 41 + 7], (3 * 41 + 7) as f32);

        let wrong = CtfGrid { values: Array2::zeros((200, 40)), ..real };
        assert!(to_feature_block(&wrong).is_err());
        assert!(FeatureBlock::from_flat(vec![0.0; 10]).is_err());
    }

    #[test]
    fn split_sizes() {
        let sources: Vec<_> = (0..15916)
            .map(|i| if i < 7116 { SampleSource::Gscm } else { SampleSource::Tdl })
            .collect();
        let split = split_dataset(&sources, 0.3, 1).unwrap();
        assert_eq!(split.test.len(), 4775);
        assert_eq!(split.train.len() + split.test.len(), 15916);
        let gscm_test = split.test.iter().filter(|&&i| i < 7116).count() as f64;
        assert!((gscm_test - 0.3 * 7116.0).abs() <= 1.0);
        let tdl_test = split.test.len() as f64 - gscm_test;
        assert!((tdl_test - 0.3 * 8800.0).abs() <= 1.0);

        let none = split_dataset(&sources[..100], 0.0, 1).unwrap();
        assert!(none.test.is_empty());
        assert!(split_dataset(&sources[..1], 0.3, 1).is_err());
    }

    proptest! {
        #[test]
        fn feature_roundtrip(vals in prop::collection::vec(-1e3f32..1e3, 2 * 8200)) {
            let grid = feature_sized(|m, k| {
                let i = m * 41 + k;
                Complex64::new(vals[2 * i] as f64, vals[2 * i + 1] as f64)
            });
            let fb = to_feature_block(&grid).unwrap();
            prop_assert_eq!(fb.to_values(), grid.values);
        }

        #[test]
        fn split_is_a_stratified_partition(n_a in 1usize..300, n_b in 1usize..300, frac in 0.0f64..1.0, seed: u64) {
            let mut sources = vec![SampleSource::Gscm; n_a];
            sources.extend(vec![SampleSource::Tdl; n_b]);
            prop_assume!(sources.len() >= 2);
            let s = split_dataset(&sources, frac, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..sources.len()).collect::<Vec<_>>());
            prop_assert_eq!(s.test.len(), (frac * sources.len() as f64).round() as usize);
            let a_test = s.test.iter().filter(|&&i| i < n_a).count() as f64;
            prop_assert!((a_test - frac * n_a as f64).abs() <= 1.0 + 1e-9);
            prop_assert_eq!(&s, &split_dataset(&sources, frac, seed).unwrap());
        }
    }
}
