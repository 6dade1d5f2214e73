//! Uncoded QPSK over AWGN, for calibrating the modem and noise model against
//! the analytic bit error rate.

use ferlink_core::seed::rng_from;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::ofdm::{qpsk_llrs, qpsk_map};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits: u64,
    pub errors: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.bits as f64
    }
}

/// Hard-decision QPSK bit errors over `bits` bits (rounded up to whole symbols)
/// at `ebn0_db`. Symbols have unit energy, so `N0 = 1 / (2 Eb/N0)`.
pub fn uncoded_qpsk_ber(ebn0_db: f64, bits: u64, seed: u64) -> BerPoint {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let n0 = 1.0 / (2.0 * ebn0);
    let std = (n0 / 2.0).sqrt();
    let one = Complex64::new(1.0, 0.0);
    let mut rng = rng_from(seed);
    let symbols = bits.div_ceil(2);
    let mut errors = 0;
    for _ in 0..symbols {
        let b0: u8 = rng.random_range(0..=1);
        let b1: u8 = rng.random_range(0..=1);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let y = qpsk_map(b0, b1) + Complex64::new(re, im) * std;
        let [l0, l1] = qpsk_llrs(y, one, n0);
        errors += u64::from((l0 < 0.0) as u8 != b0) + u64::from((l1 < 0.0) as u8 != b1);
    }
    BerPoint { ebn0_db, bits: 2 * symbols, errors }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_limit() {
        assert_eq!(uncoded_qpsk_ber(60.0, 10_000, 1).errors, 0);
    }

    #[test]
    fn odd_bit_counts_round_up() {
        assert_eq!(uncoded_qpsk_ber(3.0, 11, 1).bits, 12);
    }

    #[test]
    fn deterministic() {
        assert_eq!(uncoded_qpsk_ber(2.0, 5000, 9), uncoded_qpsk_ber(2.0, 5000, 9));
    }
}
