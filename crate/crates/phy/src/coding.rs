//! Rate-1/2, constraint-length-7 convolutional code (generators 133 and 171
//! octal) and its soft-input Viterbi decoder.

pub const GENERATOR_A: u32 = 0o133;
pub const GENERATOR_B: u32 = 0o171;
const STATES: usize = 64;

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Output pair for `input` entering the encoder in `state` (six previous inputs,
/// most recent in bit 5).
#[inline]
fn branch(state: usize, input: u8) -> (u8, u8) {
    let reg = ((input as u32) << 6) | state as u32;
    (parity(reg & GENERATOR_A), parity(reg & GENERATOR_B))
}

/// Encode from the zero state. The caller appends the six tail zeros.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * bits.len());
    let mut state = 0usize;
    for &b in bits {
        let (a, c) = branch(state, b & 1);
        out.push(a);
        out.push(c);
        state = (((b & 1) as usize) << 5) | (state >> 1);
    }
    out
}

/// Maximum-likelihood decoding over the 64-state trellis.
///
/// `llrs[i] = ln P(c_i = 0) / P(c_i = 1)`, two per information bit. The
/// survivor ending in state 0 is traced back.
pub fn viterbi_decode(llrs: &[f64]) -> Vec<u8> {
    assert!(llrs.len().is_multiple_of(2), "odd number of coded bits");
    let steps = llrs.len() / 2;

    // Expected outputs on the two branches into each next state.
    let mut table = [[0usize; 2]; STATES];
    for (next, entry) in table.iter_mut().enumerate() {
        let input = (next >> 5) as u8;
        for (b, e) in entry.iter_mut().enumerate() {
            let (a, c) = branch(((next << 1) & (STATES - 1)) | b, input);
            *e = 2 * a as usize + c as usize;
        }
    }

    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut next_metric = [0.0; STATES];
    let mut decisions = vec![0u64; steps];

    for (t, pair) in llrs.chunks_exact(2).enumerate() {
        let (la, lb) = (pair[0], pair[1]);
        // Indexed by 2 * a + b.
        let gains = [la + lb, la - lb, lb - la, -la - lb];
        let mut bits = 0u64;
        for next in 0..STATES {
            let prev = (next << 1) & (STATES - 1);
            let m0 = metric[prev] + gains[table[next][0]];
            let m1 = metric[prev | 1] + gains[table[next][1]];
            if m1 > m0 {
                next_metric[next] = m1;
                bits |= 1 << next;
            } else {
                next_metric[next] = m0;
            }
        }
        decisions[t] = bits;
        // Keep metrics bounded over long frames.
        let top = next_metric.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (m, n) in metric.iter_mut().zip(&next_metric) {
            *m = n - top;
        }
    }

    let mut out = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        out[t] = (state >> 5) as u8;
        let b = ((decisions[t] >> state) & 1) as usize;
        state = ((state << 1) & (STATES - 1)) | b;
    }
    out
}

/// Hard-decision LLRs of magnitude one.
pub fn bits_to_llrs(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_in_zero_out() {
        assert_eq!(conv_encode(&[0; 20]), vec![0; 40]);
    }

    #[test]
    fn impulse_response_interleaves_generators() {
        let mut bits = vec![0u8; 7];
        bits[0] = 1;
        // 133 = 1 011 011, 171 = 1 111 001, read from the newest register stage.
        let expected = [1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1];
        assert_eq!(conv_encode(&bits), expected);
    }

    #[test]
    fn erasures_decode_to_a_codeword() {
        let bits = viterbi_decode(&[0.0; 64]);
        assert_eq!(bits.len(), 32);
        assert!(bits.iter().all(|&b| b <= 1));
        // Traceback from state 0 means the path was flushed by six zeros.
        assert_eq!(bits[26..], [0; 6]);
    }

    fn frame() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..=1, 1..200).prop_map(|mut v| {
            v.extend([0; 6]);
            v
        })
    }

    proptest! {
        #[test]
        fn output_is_twice_as_long(bits in prop::collection::vec(0u8..=1, 0..300)) {
            prop_assert_eq!(conv_encode(&bits).len(), 2 * bits.len());
        }

        #[test]
        fn noiseless_roundtrip(bits in frame()) {
            prop_assert_eq!(viterbi_decode(&bits_to_llrs(&conv_encode(&bits))), bits);
        }

        #[test]
        fn corrects_two_flipped_bits(bits in frame(), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
            let mut llr = bits_to_llrs(&conv_encode(&bits));
            let n = llr.len();
            llr[i.index(n)] *= -1.0;
            let j = j.index(n);
            if j != i.index(n) {
                llr[j] *= -1.0;
            }
            prop_assert_eq!(viterbi_decode(&llr), bits);
        }

        #[test]
        fn code_is_linear(a in frame(), seed in any::<u64>()) {
            let b: Vec<u8> = a.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ea = conv_encode(&a);
            let eb = conv_encode(&b);
            let es: Vec<u8> = ea.iter().zip(&eb).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(conv_encode(&sum), es);
        }
    }
}
