//! Frame-level link simulation through a frozen-path channel.

use ferlink_core::channel::{evaluate_uniform_at, StationaryProcess};
use ferlink_core::seed::{domain, mix_seed, rng_from};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coding::{conv_encode, viterbi_decode};
use crate::config::{PhyConfig, CODED_BITS_PER_SYMBOL, CYCLIC_PREFIX, DATA_BITS_PER_SYMBOL, SERVICE_BITS};
use crate::error::Result;
use crate::ofdm::{
    data_positions, data_symbol_time, interleaver, qpsk_llrs, qpsk_map, DATA_SUBCARRIERS, LTF, LTF_TIMES, SPAN,
    SUBCARRIER_SPACING,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerMeasurement {
    pub region_id: String,
    pub frames_sent: u64,
    pub frames_failed: u64,
    pub fer: f64,
    /// Excess delay exceeded the cyclic prefix (ISI neglected).
    pub cp_exceeded: bool,
}

/// Reusable per-region simulator; holds the scratch buffers of one frame.
pub struct LinkSimulator<'a> {
    process: &'a StationaryProcess,
    cfg: PhyConfig,
    noise_std: f64,
    llr_var: f64,
    perm: Vec<usize>,
    data_pos: [usize; DATA_SUBCARRIERS],
    h: Vec<Complex64>,
    estimate: Vec<Complex64>,
    info: Vec<u8>,
    llrs: Vec<f64>,
}

impl<'a> LinkSimulator<'a> {
    pub fn new(process: &'a StationaryProcess, cfg: &PhyConfig) -> Result<Self> {
        cfg.validate()?;
        let noise_var = cfg.noise_variance();
        Ok(Self {
            process,
            cfg: cfg.clone(),
            noise_std: if cfg.add_noise { (noise_var / 2.0).sqrt() } else { 0.0 },
            llr_var: if cfg.add_noise { noise_var } else { 1.0 },
            perm: interleaver(CODED_BITS_PER_SYMBOL, 2),
            data_pos: data_positions(),
            h: Vec::with_capacity(SPAN),
            estimate: vec![Complex64::new(0.0, 0.0); SPAN],
            info: Vec::new(),
            llrs: Vec::new(),
        })
    }

    /// Path delays spread wider than the cyclic prefix.
    pub fn cp_exceeded(&self) -> bool {
        let paths = self.process.paths();
        let lo = paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
        let hi = paths.iter().map(|p| p.delay).fold(0.0, f64::max);
        hi - lo > CYCLIC_PREFIX
    }

    fn channel_at(&mut self, t: f64) -> Result<()> {
        evaluate_uniform_at(self.process, t, -26.0 * SUBCARRIER_SPACING, SUBCARRIER_SPACING, SPAN, &mut self.h)?;
        Ok(())
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        if self.noise_std == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * self.noise_std
    }

    /// Send one frame starting at `t_start`; `true` if any payload bit is wrong.
    pub fn frame_fails(&mut self, t_start: f64, seed: u64) -> Result<bool> {
        let mut rng = rng_from(seed);
        let payload_bits = 8 * self.cfg.payload_bytes;
        let symbols = self.cfg.num_symbols();

        self.info.clear();
        self.info.resize(symbols * DATA_BITS_PER_SYMBOL, 0);
        for b in &mut self.info[SERVICE_BITS..SERVICE_BITS + payload_bits] {
            *b = rng.random_range(0..=1);
        }
        let coded = conv_encode(&self.info);

        // LS estimate averaged over the two long training symbols.
        self.estimate.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
        for t in LTF_TIMES {
            self.channel_at(t_start + t)?;
            for k in 0..SPAN {
                let x = LTF[k] as f64;
                let y = self.h[k] * x + self.noise(&mut rng);
                self.estimate[k] += 0.5 * y * x;
            }
        }

        self.llrs.clear();
        self.llrs.resize(coded.len(), 0.0);
        let mut block = [0u8; CODED_BITS_PER_SYMBOL];
        for j in 0..symbols {
            self.channel_at(t_start + data_symbol_time(j))?;
            let coded_block = &coded[j * CODED_BITS_PER_SYMBOL..(j + 1) * CODED_BITS_PER_SYMBOL];
            for (k, &b) in coded_block.iter().enumerate() {
                block[self.perm[k]] = b;
            }
            let mut received = [0.0; CODED_BITS_PER_SYMBOL];
            for (d, &pos) in self.data_pos.iter().enumerate() {
                let s = qpsk_map(block[2 * d], block[2 * d + 1]);
                let y = self.h[pos] * s + self.noise(&mut rng);
                let [l0, l1] = qpsk_llrs(y, self.estimate[pos], self.llr_var);
                received[2 * d] = l0;
                received[2 * d + 1] = l1;
            }
            let llr_block = &mut self.llrs[j * CODED_BITS_PER_SYMBOL..(j + 1) * CODED_BITS_PER_SYMBOL];
            for (k, l) in llr_block.iter_mut().enumerate() {
                *l = received[self.perm[k]];
            }
        }

        let decoded = viterbi_decode(&self.llrs);
        let range = SERVICE_BITS..SERVICE_BITS + payload_bits;
        Ok(decoded[range.clone()] != self.info[range])
    }
}

/// One frame through `process` starting at `t_start`; `true` means it failed.
pub fn simulate_frame(process: &StationaryProcess, t_start: f64, cfg: &PhyConfig, seed: u64) -> Result<bool> {
    LinkSimulator::new(process, cfg)?.frame_fails(t_start, seed)
}

/// Failure flags of all `frames_per_region` frames, sent every `1 / frame_rate`
/// seconds from `t = 0`. Frame `i` draws from `mix_seed(seed, [FRAME, i])`.
pub fn frame_outcomes(process: &StationaryProcess, cfg: &PhyConfig, seed: u64) -> Result<Vec<bool>> {
    let mut sim = LinkSimulator::new(process, cfg)?;
    process.check_horizon(cfg.region_duration())?;
    (0..cfg.frames_per_region)
        .map(|i| sim.frame_fails(i as f64 / cfg.frame_rate, mix_seed(seed, &[domain::FRAME, i])))
        .collect()
}

pub fn measure_fer(process: &StationaryProcess, cfg: &PhyConfig, seed: u64, region_id: &str) -> Result<FerMeasurement> {
    let outcomes = frame_outcomes(process, cfg, seed)?;
    let failed = outcomes.iter().filter(|&&f| f).count() as u64;
    let sent = outcomes.len() as u64;
    Ok(FerMeasurement {
        region_id: region_id.to_string(),
        frames_sent: sent,
        frames_failed: failed,
        fer: failed as f64 / sent as f64,
        cp_exceeded: LinkSimulator::new(process, cfg)?.cp_exceeded(),
    })
}
