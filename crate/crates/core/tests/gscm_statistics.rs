use ferlink_core::channel::{evaluate_ctf_at, GridSpec, PathKind, StationaryProcess};
use ferlink_core::gscm::{compute_paths, generate_v2i_run, place_scatterers, CanyonScenario, TxState};
use ferlink_core::stats::{ks_critical_value, ks_statistic, rayleigh_cdf, rician_k_moment};
use num_complex::Complex64;

const REALIZATIONS: u64 = 10_000;

/// Narrowband response of one fixed geometry over independent phase draws.
fn phase_ensemble(scenario: &CanyonScenario) -> (Vec<Complex64>, Vec<f64>) {
    let spec = GridSpec::default();
    let scatterers = place_scatterers(scenario, 5).unwrap();
    let (position, velocity) = scenario.tx_state(3.0);
    let tx = TxState { position, velocity };
    let rx = scenario.rx_positions[0];
    let mut amplitudes = Vec::new();
    let h = (0..REALIZATIONS)
        .map(|seed| {
            let paths = compute_paths(scenario, &scatterers, tx, rx, spec.carrier_frequency, seed).unwrap();
            if amplitudes.is_empty() {
                amplitudes = paths.iter().map(|p| p.amplitude).collect();
            }
            let p = StationaryProcess::with_speed_limit(paths, spec, 100.0).unwrap();
            evaluate_ctf_at(&p, 0.0, &[0.0]).unwrap()[0]
        })
        .collect();
    (h, amplitudes)
}

#[test]
fn nlos_envelope_over_phase_realizations_is_rayleigh() {
    let scenario = CanyonScenario {
        los_blockage_probability: 1.0,
        num_static_discrete: 0,
        num_mobile_discrete: 0,
        excess_loss_db: [10.0, 10.0],
        ..CanyonScenario::default()
    };
    let (h, amplitudes) = phase_ensemble(&scenario);
    let power: f64 = amplitudes.iter().map(|a| a * a).sum();
    let env: Vec<f64> = h.iter().map(|v| v.norm()).collect();
    let d = ks_statistic(&env, |r| rayleigh_cdf(r, power));
    assert!(d < ks_critical_value(env.len(), 0.01), "KS {d}");
}

#[test]
fn strong_los_envelope_is_rician() {
    let scenario = CanyonScenario {
        los_blockage_probability: 0.0,
        num_static_discrete: 0,
        num_mobile_discrete: 0,
        excess_loss_db: [10.0, 10.0],
        ..CanyonScenario::default()
    };
    let (h, amplitudes) = phase_ensemble(&scenario);
    // First path is the LOS when unblocked.
    let los = amplitudes[0].powi(2);
    let scattered: f64 = amplitudes[1..].iter().map(|a| a * a).sum();
    let k_geo = 10.0 * (los / scattered).log10();
    let k_est = 10.0 * rician_k_moment(&h).log10();
    assert!(k_geo > 6.0, "LOS not dominant: {k_geo} dB");
    assert!((k_est - k_geo).abs() <= 1.0, "estimated {k_est} dB, geometric {k_geo} dB");
}

#[test]
fn paths_respect_geometry_bounds() {
    let scenario = CanyonScenario::default();
    let spec = GridSpec::default();
    let fc = spec.carrier_frequency;
    let bound = fc * (scenario.max_vehicle_speed + scenario.mobile_speed_range[1]) / ferlink_core::SPEED_OF_LIGHT;
    for run in 0..5 {
        for region in generate_v2i_run(&scenario, &spec, 10, run, 77).unwrap() {
            let paths = region.process.paths();
            let (position, _) = scenario.tx_state(region.provenance.trajectory_region as f64 * spec.stationarity_time());
            let rx = scenario.rx_positions[region.provenance.rx_index];
            let los_delay = (position[0] - rx[0]).hypot(position[1] - rx[1]) / ferlink_core::SPEED_OF_LIGHT;
            for p in paths {
                assert!(p.delay >= los_delay * (1.0 - 1e-12));
                // Mobile scatterers move both path legs, so their bound doubles.
                let b = if p.kind == PathKind::MobileDiscrete {
                    fc * (scenario.max_vehicle_speed + 2.0 * scenario.mobile_speed_range[1]) / ferlink_core::SPEED_OF_LIGHT
                } else {
                    bound
                };
                assert!(p.doppler(fc).abs() <= b * (1.0 + 1e-12));
            }
        }
    }
}
