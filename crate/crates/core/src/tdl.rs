//! Stochastic tapped-delay-line channel: exponential power delay profile, each
//! tap a sum of equal-power sinusoids with uniform random phases and uniform
//! Doppler shifts (Rayleigh), optionally with a specular component on tap 0
//! (Rician).

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{velocity_for_doppler, GridSpec, PathKind, PropagationPath, StationaryProcess};
use crate::error::{Error, Result};
use crate::seed::{domain, mix_seed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdlConfig {
    pub num_taps: usize,
    /// Seconds between taps.
    pub tap_spacing: f64,
    /// Exponent of the PDP in nepers per tap: `p_i ~ exp(-decay * i)`.
    pub pdp_decay: f64,
    pub paths_per_tap: usize,
    /// Rician K-factor of tap 0 in dB; `None` for NLOS.
    pub rician_k_db: Option<f64>,
    /// Hz.
    pub max_doppler: f64,
    /// Sum of all path powers, linear.
    pub total_power: f64,
    /// Seconds the process must be extendable for; sets the common delay offset
    /// that keeps every drifting delay nonnegative.
    pub extension_horizon: f64,
}

impl Default for TdlConfig {
    fn default() -> Self {
        Self {
            num_taps: 8,
            tap_spacing: 100e-9,
            pdp_decay: 0.7,
            paths_per_tap: 40,
            rician_k_db: None,
            max_doppler: 300.0,
            total_power: 1.0,
            extension_horizon: 10.0,
        }
    }
}

impl TdlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("tdl: {m}")));
        if self.num_taps == 0 {
            return bad(if self.rician_k_db.is_some() {
                "Rician K-factor requires at least one tap"
            } else {
                "num_taps must be at least 1"
            });
        }
        if self.paths_per_tap < 2 {
            return bad("paths_per_tap must be at least 2");
        }
        if !(self.tap_spacing >= 0.0 && self.tap_spacing.is_finite()) {
            return bad("tap_spacing must be nonnegative");
        }
        if !(self.pdp_decay.is_finite() && self.pdp_decay >= 0.0) {
            return bad("pdp_decay must be nonnegative");
        }
        if !(self.max_doppler.is_finite() && self.max_doppler >= 0.0) {
            return bad("max_doppler must be nonnegative");
        }
        if !(self.total_power.is_finite() && self.total_power > 0.0) {
            return bad("total_power must be positive");
        }
        if !(self.extension_horizon.is_finite() && self.extension_horizon >= 0.0) {
            return bad("extension_horizon must be nonnegative");
        }
        if let Some(k) = self.rician_k_db {
            if !k.is_finite() {
                return bad("rician_k_db must be finite");
            }
        }
        Ok(())
    }

    /// Tap powers `p_i = P exp(-decay i) / sum_j exp(-decay j)`.
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.num_taps)
            .map(|i| (-self.pdp_decay * i as f64).exp())
            .collect();
        let norm: f64 = raw.iter().sum();
        raw.into_iter().map(|p| self.total_power * p / norm).collect()
    }

    /// Delay of tap 0: the largest delay drift any path can accumulate over the
    /// extension horizon.
    pub fn base_delay(&self, carrier_frequency: f64) -> f64 {
        self.max_doppler * self.extension_horizon / carrier_frequency * (1.0 + 1e-9)
    }

    /// RMS delay spread of the analytic PDP (specular power included in tap 0).
    pub fn rms_delay_spread(&self) -> f64 {
        let p = self.tap_powers();
        let total: f64 = p.iter().sum();
        let mean: f64 = p.iter().enumerate().map(|(i, p)| p * i as f64).sum::<f64>() / total;
        let second: f64 = p.iter().enumerate().map(|(i, p)| p * (i * i) as f64).sum::<f64>() / total;
        (second - mean * mean).max(0.0).sqrt() * self.tap_spacing
    }
}

/// Draw one realization. Doppler shifts map back to relative velocities through
/// the carrier frequency so the result evolves like any other process.
pub fn sample_tdl_process(config: &TdlConfig, spec: &GridSpec, seed: u64) -> Result<StationaryProcess> {
    config.validate()?;
    spec.validate()?;
    let mut rng = rng_from(mix_seed(seed, &[domain::TDL_PROCESS]));
    let fc = spec.carrier_frequency;
    let fd = config.max_doppler;
    let base = config.base_delay(fc);
    let doppler = |rng: &mut rand_chacha::ChaCha8Rng| {
        if fd == 0.0 {
            0.0
        } else {
            rng.random_range(-fd..=fd)
        }
    };

    let powers = config.tap_powers();
    let mut paths = Vec::with_capacity(config.num_taps * config.paths_per_tap + 1);
    for (i, &p_tap) in powers.iter().enumerate() {
        let delay = base + i as f64 * config.tap_spacing;
        let mut scattered = p_tap;
        if i == 0 {
            if let Some(k_db) = config.rician_k_db {
                let k = 10f64.powf(k_db / 10.0);
                let specular = p_tap * k / (k + 1.0);
                scattered = p_tap / (k + 1.0);
                let phase = rng.random_range(0.0..TAU);
                let f = doppler(&mut rng);
                paths.push(PropagationPath::new(
                    specular.sqrt(),
                    phase,
                    delay,
                    velocity_for_doppler(f, fc),
                    PathKind::Los,
                )?);
            }
        }
        let amplitude = (scattered / config.paths_per_tap as f64).sqrt();
        for _ in 0..config.paths_per_tap {
            let phase = rng.random_range(0.0..TAU);
            let f = doppler(&mut rng);
            paths.push(PropagationPath::new(
                amplitude,
                phase,
                delay,
                velocity_for_doppler(f, fc),
                PathKind::Diffuse,
            )?);
        }
    }
    StationaryProcess::with_speed_limit(paths, *spec, velocity_for_doppler(fd, fc) * (1.0 + 1e-12))
}

/// Per-region parameter ranges for dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdlRanges {
    /// Mean received SNR, dB, drawn uniformly.
    pub snr_db: [f64; 2],
    /// Tx power minus noise floor, dB; converts SNR into total channel power.
    pub link_budget_db: f64,
    pub los_probability: f64,
    /// K-factor in dB for LOS regions, drawn uniformly.
    pub rician_k_db: [f64; 2],
    /// Maximum Doppler in Hz, drawn log-uniformly.
    pub max_doppler: [f64; 2],
    pub pdp_decay: [f64; 2],
    pub tap_spacing: f64,
    pub num_taps: usize,
    pub paths_per_tap: usize,
    pub extension_horizon: f64,
}

impl Default for TdlRanges {
    fn default() -> Self {
        Self {
            snr_db: [0.0, 30.0],
            link_budget_db: 108.0,
            los_probability: 0.5,
            rician_k_db: [0.0, 15.0],
            max_doppler: [50.0, 1000.0],
            pdp_decay: [0.3, 1.2],
            tap_spacing: 100e-9,
            num_taps: 8,
            paths_per_tap: 40,
            extension_horizon: 10.0,
        }
    }
}

fn check_range(name: &'static str, [lo, hi]: [f64; 2]) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::EmptyRange(name))
    }
}

fn draw(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

impl TdlRanges {
    pub fn validate(&self) -> Result<()> {
        check_range("snr_db", self.snr_db)?;
        check_range("rician_k_db", self.rician_k_db)?;
        check_range("max_doppler", self.max_doppler)?;
        check_range("pdp_decay", self.pdp_decay)?;
        if self.max_doppler[0] <= 0.0 {
            return Err(Error::EmptyRange("max_doppler"));
        }
        if !(0.0..=1.0).contains(&self.los_probability) {
            return Err(Error::InvalidConfig("tdl: los_probability must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `count` region configurations drawn from `ranges`.
pub fn sample_dataset_configs(ranges: &TdlRanges, count: usize, seed: u64) -> Result<Vec<TdlConfig>> {
    ranges.validate()?;
    if count == 0 {
        return Err(Error::InvalidConfig("tdl: count must be at least 1".into()));
    }
    let mut rng = rng_from(mix_seed(seed, &[domain::TDL_CONFIG]));
    let log_doppler = [ranges.max_doppler[0].ln(), ranges.max_doppler[1].ln()];
    (0..count)
        .map(|_| {
            let snr_db = draw(&mut rng, ranges.snr_db);
            let los = rng.random_bool(ranges.los_probability);
            let k = draw(&mut rng, ranges.rician_k_db);
            let config = TdlConfig {
                num_taps: ranges.num_taps,
                tap_spacing: ranges.tap_spacing,
                pdp_decay: draw(&mut rng, ranges.pdp_decay),
                paths_per_tap: ranges.paths_per_tap,
                rician_k_db: los.then_some(k),
                max_doppler: draw(&mut rng, log_doppler).exp(),
                total_power: 10f64.powf((snr_db - ranges.link_budget_db) / 10.0),
                extension_horizon: ranges.extension_horizon,
            };
            config.validate()?;
            Ok(config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_normalised_and_exponential() {
        let cfg = TdlConfig { total_power: 2.5, pdp_decay: 0.9, ..Default::default() };
        let p = cfg.tap_powers();
        assert!((p.iter().sum::<f64>() - 2.5).abs() < 1e-12);
        for w in p.windows(2) {
            assert!((w[1] / w[0] - (-0.9f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn path_powers_sum_to_total() {
        let spec = GridSpec::default();
        for k in [None, Some(10.0)] {
            let cfg = TdlConfig { rician_k_db: k, ..Default::default() };
            let p = sample_tdl_process(&cfg, &spec, 4).unwrap();
            assert!((p.total_power() - 1.0).abs() < 1e-12);
            assert_eq!(p.paths().len(), 320 + usize::from(k.is_some()));
        }
    }

    #[test]
    fn delays_stay_nonnegative_over_horizon() {
        let cfg = TdlConfig { max_doppler: 1000.0, extension_horizon: 2.0, ..Default::default() };
        let p = sample_tdl_process(&cfg, &GridSpec::default(), 1).unwrap();
        assert!(p.check_horizon(2.0).is_ok());
        assert!(p.extension_horizon() >= 2.0);
    }

    #[test]
    fn doppler_support() {
        let spec = GridSpec::default();
        let cfg = TdlConfig { max_doppler: 250.0, ..Default::default() };
        let p = sample_tdl_process(&cfg, &spec, 8).unwrap();
        assert!(p.paths().iter().all(|q| q.doppler(spec.carrier_frequency).abs() <= 250.0 * (1.0 + 1e-9)));
    }

    #[test]
    fn rejects_bad_configs() {
        let spec = GridSpec::default();
        let zero_taps = TdlConfig { num_taps: 0, rician_k_db: Some(3.0), ..Default::default() };
        assert!(sample_tdl_process(&zero_taps, &spec, 0).is_err());
        let one_path = TdlConfig { paths_per_tap: 1, ..Default::default() };
        assert!(sample_tdl_process(&one_path, &spec, 0).is_err());
    }

    #[test]
    fn dataset_configs() {
        let r = TdlRanges::default();
        assert_eq!(sample_dataset_configs(&r, 8800, 1).unwrap().len(), 8800);
        assert_eq!(sample_dataset_configs(&r, 50, 9).unwrap(), sample_dataset_configs(&r, 50, 9).unwrap());

        let degenerate = TdlRanges {
            snr_db: [12.0, 12.0],
            los_probability: 1.0,
            rician_k_db: [6.0, 6.0],
            max_doppler: [400.0, 400.0],
            pdp_decay: [0.5, 0.5],
            ..Default::default()
        };
        let cfgs = sample_dataset_configs(&degenerate, 20, 3).unwrap();
        assert!(cfgs.windows(2).all(|w| w[0] == w[1]));
        assert!((cfgs[0].max_doppler - 400.0).abs() < 1e-9);

        let empty = TdlRanges { snr_db: [5.0, 1.0], ..Default::default() };
        assert!(matches!(sample_dataset_configs(&empty, 3, 0), Err(Error::EmptyRange("snr_db"))));
    }

    #[test]
    fn drawn_configs_lie_in_ranges() {
        let r = TdlRanges::default();
        for c in sample_dataset_configs(&r, 500, 2).unwrap() {
            let snr = 10.0 * c.total_power.log10() + r.link_budget_db;
            assert!((0.0..=30.0).contains(&snr));
            assert!((50.0..=1000.0 + 1e-9).contains(&c.max_doppler));
            assert!((0.3..=1.2).contains(&c.pdp_decay));
            if let Some(k) = c.rician_k_db {
                assert!((0.0..=15.0).contains(&k));
            }
        }
    }
}
