use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{DATA_SUBCARRIERS, PREAMBLE_DURATION, SYMBOL_DURATION, USED_SUBCARRIERS};

/// Service field bits prepended to the payload.
pub const SERVICE_BITS: usize = 16;
/// Zero bits flushing the encoder back to state 0.
pub const TAIL_BITS: usize = 6;
/// Coded bits per OFDM symbol (QPSK, 48 data subcarriers).
pub const CODED_BITS_PER_SYMBOL: usize = 2 * DATA_SUBCARRIERS;
/// Information bits per OFDM symbol at rate 1/2.
pub const DATA_BITS_PER_SYMBOL: usize = CODED_BITS_PER_SYMBOL / 2;
/// Cyclic prefix length: a quarter of the 6.4 us FFT period.
pub const CYCLIC_PREFIX: f64 = 1.6e-6;

/// Link parameters of the 10 MHz QPSK rate-1/2 mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub payload_bytes: usize,
    pub frames_per_region: u64,
    /// Frames per second.
    pub frame_rate: f64,
    pub tx_power_dbm: f64,
    /// Noise power over the 10 MHz channel.
    pub noise_floor_dbm: f64,
    /// Disable to run the chain noise-free.
    pub add_noise: bool,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            payload_bytes: 100,
            frames_per_region: 20_000,
            frame_rate: 2200.0,
            tx_power_dbm: 10.0,
            noise_floor_dbm: -98.0,
            add_noise: true,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.payload_bytes == 0 {
            return Err(Error::Config("payload must be at least one byte".into()));
        }
        if self.frames_per_region == 0 {
            return Err(Error::Config("frames_per_region must be at least 1".into()));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::Config(format!("frame_rate {}", self.frame_rate)));
        }
        if !(self.tx_power_dbm.is_finite() && self.noise_floor_dbm.is_finite()) {
            return Err(Error::Config("powers must be finite".into()));
        }
        if self.airtime() > 1.0 / self.frame_rate {
            return Err(Error::Config(format!(
                "frame airtime {:.1} us exceeds frame spacing {:.1} us",
                self.airtime() * 1e6,
                1e6 / self.frame_rate
            )));
        }
        Ok(())
    }

    pub fn num_symbols(&self) -> usize {
        (SERVICE_BITS + 8 * self.payload_bytes + TAIL_BITS).div_ceil(DATA_BITS_PER_SYMBOL)
    }

    /// Preamble plus data symbols, seconds.
    pub fn airtime(&self) -> f64 {
        PREAMBLE_DURATION + self.num_symbols() as f64 * SYMBOL_DURATION
    }

    /// Time the last frame of a region ends.
    pub fn region_duration(&self) -> f64 {
        (self.frames_per_region - 1) as f64 / self.frame_rate + self.airtime()
    }

    /// Noise variance per subcarrier relative to a unit-energy symbol on a unit
    /// channel: the transmit power spreads over the used subcarriers, the noise
    /// over the whole FFT.
    pub fn noise_variance(&self) -> f64 {
        let tx_mw = 10f64.powf(self.tx_power_dbm / 10.0);
        let noise_mw = 10f64.powf(self.noise_floor_dbm / 10.0);
        noise_mw / 64.0 * USED_SUBCARRIERS as f64 / tx_mw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_frame_layout() {
        let c = PhyConfig::default();
        c.validate().unwrap();
        assert_eq!(c.num_symbols(), 18);
        assert!((c.airtime() - 184e-6).abs() < 1e-15);
        // 10 dBm over 52 of 64 bins against -98 dBm: 108 dB + 0.9 dB
        let snr_db = -10.0 * c.noise_variance().log10();
        assert!((snr_db - (108.0 + 10.0 * (64.0f64 / 52.0).log10())).abs() < 1e-9);
    }

    #[test]
    fn rejects_frames_longer_than_spacing() {
        let c = PhyConfig { payload_bytes: 1500, ..PhyConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(PhyConfig { payload_bytes: 0, ..PhyConfig::default() }.validate().is_err());
        assert!(PhyConfig { frames_per_region: 0, ..PhyConfig::default() }.validate().is_err());
    }
}
