//! Subcarrier layout, interleaving and QPSK mapping of the 10 MHz OFDM mode.

use num_complex::Complex64;

pub const FFT_SIZE: usize = 64;
pub const USED_SUBCARRIERS: usize = 52;
pub const DATA_SUBCARRIERS: usize = 48;
pub const PILOT_SUBCARRIERS: [i32; 4] = [-21, -7, 7, 21];
/// 10 MHz / 64.
pub const SUBCARRIER_SPACING: f64 = 156.25e3;
pub const SYMBOL_DURATION: f64 = 8e-6;
/// Short and long training fields plus SIGNAL.
pub const PREAMBLE_DURATION: f64 = 40e-6;
/// Centres of the two long training symbols' FFT windows.
pub const LTF_TIMES: [f64; 2] = [22.4e-6, 28.8e-6];
/// Subcarriers -26..=26 including DC, the span the channel is evaluated on.
pub const SPAN: usize = 53;

/// Long training sequence on subcarriers -26..=26.
pub const LTF: [i8; SPAN] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1, -1, -1, 1, 1, -1, 1,
    -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

const QPSK_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Midpoint of data symbol `j` relative to the frame start.
pub fn data_symbol_time(j: usize) -> f64 {
    PREAMBLE_DURATION + (j as f64 + 0.5) * SYMBOL_DURATION
}

/// Positions in the -26..=26 span of the data subcarriers, in mapping order.
pub fn data_positions() -> [usize; DATA_SUBCARRIERS] {
    let mut out = [0; DATA_SUBCARRIERS];
    let mut n = 0;
    for k in -26i32..=26 {
        if k != 0 && !PILOT_SUBCARRIERS.contains(&k) {
            out[n] = (k + 26) as usize;
            n += 1;
        }
    }
    out
}

/// `perm[k]` is the position coded bit `k` occupies after interleaving.
pub fn interleaver(coded_bits: usize, bits_per_subcarrier: usize) -> Vec<usize> {
    let s = (bits_per_subcarrier / 2).max(1);
    (0..coded_bits)
        .map(|k| {
            let i = (coded_bits / 16) * (k % 16) + k / 16;
            s * (i / s) + (i + coded_bits - 16 * i / coded_bits) % s
        })
        .collect()
}

/// Gray-mapped QPSK: first bit on the in-phase axis, second on quadrature, bit 1
/// maps to the positive level.
#[inline]
pub fn qpsk_map(b0: u8, b1: u8) -> Complex64 {
    let level = |b: u8| if b == 0 { -QPSK_SCALE } else { QPSK_SCALE };
    Complex64::new(level(b0), level(b1))
}

/// Exact bit LLRs (`ln P(0) / P(1)`) of a QPSK symbol received as `y = h s + n`
/// with circular complex noise of variance `noise_var`.
#[inline]
pub fn qpsk_llrs(y: Complex64, h: Complex64, noise_var: f64) -> [f64; 2] {
    let z = h.conj() * y;
    let scale = -4.0 * QPSK_SCALE / noise_var;
    [scale * z.re, scale * z.im]
}
