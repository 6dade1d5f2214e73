use ferlink_core::channel::{GridSpec, PathKind, PropagationPath, StationaryProcess};
use ferlink_core::stats::{proportions_agree, q_function, qpsk_awgn_ber, wilson_interval, Z_95};
use ferlink_phy::{frame_outcomes, measure_fer, simulate_frame, uncoded_qpsk_ber, PhyConfig};

/// Flat static channel giving per-subcarrier SNR `snr_db` under `cfg`.
fn flat(cfg: &PhyConfig, snr_db: f64, phase: f64) -> StationaryProcess {
    let amplitude = (cfg.noise_variance() * 10f64.powf(snr_db / 10.0)).sqrt();
    let path = PropagationPath::new(amplitude, phase, 200e-9, 0.0, PathKind::Los).unwrap();
    StationaryProcess::new(vec![path], GridSpec::default()).unwrap()
}

fn cfg(frames: u64) -> PhyConfig {
    PhyConfig { frames_per_region: frames, ..PhyConfig::default() }
}

#[test]
fn noiseless_unit_channel_passes() {
    let c = PhyConfig { add_noise: false, ..cfg(1) };
    let p = StationaryProcess::new(
        vec![PropagationPath::new(1.0, 0.0, 0.0, 0.0, PathKind::Los).unwrap()],
        GridSpec::default(),
    )
    .unwrap();
    for seed in 0..20 {
        assert!(!simulate_frame(&p, 0.0, &c, seed).unwrap());
    }
}

#[test]
fn zero_channel_fails() {
    let p = StationaryProcess::new(
        vec![PropagationPath::new(0.0, 0.0, 0.0, 0.0, PathKind::Los).unwrap()],
        GridSpec::default(),
    )
    .unwrap();
    for add_noise in [true, false] {
        let c = PhyConfig { add_noise, ..cfg(1) };
        assert!(simulate_frame(&p, 0.0, &c, 3).unwrap());
    }
}

#[test]
fn strong_los_gives_zero_fer_and_buried_signal_gives_one() {
    let c = cfg(200);
    let p = flat(&c, 30.0, 0.4);
    let m = measure_fer(&p, &c, 1, "los").unwrap();
    assert_eq!((m.frames_sent, m.frames_failed, m.fer), (200, 0, 0.0));
    assert!(!m.cp_exceeded);
    let loud = PhyConfig { noise_floor_dbm: c.noise_floor_dbm + 60.0, ..c };
    assert_eq!(measure_fer(&p, &loud, 1, "los").unwrap().fer, 1.0);
}

#[test]
fn rerun_is_identical() {
    let c = cfg(100);
    let p = flat(&c, 3.0, 0.0);
    assert_eq!(measure_fer(&p, &c, 8, "a").unwrap(), measure_fer(&p, &c, 8, "a").unwrap());
}

#[test]
fn horizon_violation_is_reported() {
    let c = cfg(20_000);
    let path = PropagationPath::new(1e-5, 0.0, 10e-9, 20.0, PathKind::Los).unwrap();
    let p = StationaryProcess::new(vec![path], GridSpec::default()).unwrap();
    assert!(frame_outcomes(&p, &c, 0).is_err());
}

#[test]
fn uncoded_ber_matches_q_function_at_4db() {
    let point = uncoded_qpsk_ber(4.0, 1_000_000, 0x4442);
    let expected = q_function((2.0 * 10f64.powf(0.4)).sqrt());
    assert!((point.ber() / expected - 1.0).abs() < 0.03, "{} vs {expected}", point.ber());
    assert_eq!(expected, qpsk_awgn_ber(4.0));
}

#[test]
fn fer_does_not_increase_with_tx_power() {
    let base = cfg(400);
    let p = flat(&base, 0.0, 0.0);
    let mut previous: Option<(u64, u64)> = None;
    for step in 0..5 {
        let c = PhyConfig { tx_power_dbm: base.tx_power_dbm + step as f64, ..base.clone() };
        let m = measure_fer(&p, &c, 21, "sweep").unwrap();
        if let Some((k, n)) = previous {
            let (_, hi) = wilson_interval(k, n, Z_95);
            let (lo, _) = wilson_interval(m.frames_failed, m.frames_sent, Z_95);
            assert!(lo <= hi, "FER rose at step {step}: {} after {}", m.fer, k as f64 / n as f64);
        }
        previous = Some((m.frames_failed, m.frames_sent));
    }
}

#[test]
fn coding_beats_uncoded_frames() {
    let c = cfg(400);
    for snr_db in [2.0, 4.0, 6.0] {
        let m = measure_fer(&flat(&c, snr_db, 0.0), &c, 5, "flat").unwrap();
        // Uncoded QPSK: Eb/N0 = Es/N0 / 2 per bit.
        let ber = qpsk_awgn_ber(snr_db - 10.0 * 2f64.log10());
        let uncoded = 1.0 - (1.0 - ber).powi(800);
        let (lo, _) = wilson_interval(m.frames_failed, m.frames_sent, Z_95);
        assert!(lo <= uncoded, "{snr_db} dB: coded {} uncoded {uncoded}", m.fer);
    }
}

#[test]
fn fer_ignores_absolute_phase() {
    let c = cfg(600);
    let a = measure_fer(&flat(&c, 2.5, 0.0), &c, 40, "a").unwrap();
    let b = measure_fer(&flat(&c, 2.5, 2.2), &c, 41, "b").unwrap();
    assert!(a.fer > 0.02 && a.fer < 0.98, "operating point not informative: {}", a.fer);
    assert!(proportions_agree(a.frames_failed, a.frames_sent, b.frames_failed, b.frames_sent, Z_95));
}

#[test]
fn frame_halves_agree() {
    let c = cfg(1000);
    let outcomes = frame_outcomes(&flat(&c, 2.5, 1.0), &c, 77).unwrap();
    let (first, second) = outcomes.split_at(500);
    let k1 = first.iter().filter(|&&f| f).count() as u64;
    let k2 = second.iter().filter(|&&f| f).count() as u64;
    assert!(proportions_agree(k1, 500, k2, 500, Z_95));
}
