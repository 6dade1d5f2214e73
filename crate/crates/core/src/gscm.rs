//! Simplified street-canyon geometry-based stochastic channel model for
//! vehicle-to-infrastructure runs.
//!
//! The canyon runs along +x from 0 to `canyon_length` with walls at
//! `y = +-canyon_width / 2`. One run places a scatterer realization, moves the Tx
//! along its trajectory and freezes the single-bounce path parameters at each
//! waypoint for every fixed Rx position.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{GridSpec, PathKind, PropagationPath, StationaryProcess, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::seed::{domain, mix_seed, rng_from};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPoint {
    pub position: Point,
    /// Speed on the segment that starts at this point, m/s.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CanyonScenario {
    pub canyon_length: f64,
    pub canyon_width: f64,
    pub tx_trajectory: Vec<TrajectoryPoint>,
    pub rx_positions: Vec<Point>,
    /// Diffuse scatterers per metre of each wall.
    pub diffuse_density: f64,
    pub num_static_discrete: usize,
    pub num_mobile_discrete: usize,
    pub mobile_speed_range: [f64; 2],
    pub los_blockage_probability: f64,
    /// Log-uniform reflection gain range of diffuse scatterers, dB.
    pub diffuse_gain_db: [f64; 2],
    /// Log-uniform reflection gain range of discrete scatterers, dB.
    pub discrete_gain_db: [f64; 2],
    /// Per-region loss applied to every path on top of free space (shadowing,
    /// antenna and cable losses), drawn uniformly in dB.
    pub excess_loss_db: [f64; 2],
    /// Maximum vehicle speed, m/s.
    pub max_vehicle_speed: f64,
    /// Stationarity regions skipped between consecutive waypoints (1 = contiguous).
    pub waypoint_stride: usize,
}

impl Default for CanyonScenario {
    fn default() -> Self {
        let width = 24.0;
        Self {
            canyon_length: 500.0,
            canyon_width: width,
            tx_trajectory: vec![
                TrajectoryPoint { position: [0.0, -width / 4.0], speed: 10.0 },
                TrajectoryPoint { position: [250.0, -width / 4.0], speed: 8.0 },
                TrajectoryPoint { position: [500.0, -width / 4.0], speed: 0.0 },
            ],
            rx_positions: (0..10)
                .map(|i| [200.0 + 10.0 * i as f64, width / 2.0 - 2.0])
                .collect(),
            diffuse_density: 0.2,
            num_static_discrete: 10,
            num_mobile_discrete: 6,
            mobile_speed_range: [3.0, 11.0],
            los_blockage_probability: 0.3,
            diffuse_gain_db: [-40.0, -20.0],
            discrete_gain_db: [-20.0, -5.0],
            excess_loss_db: [6.0, 24.0],
            max_vehicle_speed: 11.0,
            waypoint_stride: 5,
        }
    }
}

impl CanyonScenario {
    /// Rx positions every `spacing` metres along the kerb starting at `x0`.
    pub fn with_rx_row(mut self, count: usize, x0: f64, spacing: f64) -> Self {
        let y = self.canyon_width / 2.0 - 2.0;
        self.rx_positions = (0..count).map(|i| [x0 + spacing * i as f64, y]).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(msg.to_string()));
        if !(self.canyon_width > 0.0 && self.canyon_length > 0.0) {
            return bad("canyon must have positive area");
        }
        if self.rx_positions.is_empty() {
            return bad("at least one Rx position is required");
        }
        if self.tx_trajectory.len() < 2 {
            return bad("trajectory needs at least two points");
        }
        let last = self.tx_trajectory.len() - 1;
        for (i, p) in self.tx_trajectory.iter().enumerate() {
            if !(p.speed >= 0.0 && p.speed <= self.max_vehicle_speed) {
                return bad("trajectory speed outside [0, max_vehicle_speed]");
            }
            if i < last && p.speed == 0.0 {
                return bad("only the final trajectory point may have zero speed");
            }
        }
        let [lo, hi] = self.mobile_speed_range;
        if !(0.0 <= lo && lo <= hi && hi <= self.max_vehicle_speed) {
            return bad("mobile speed range must lie in [0, max_vehicle_speed]");
        }
        if !(0.0..=1.0).contains(&self.los_blockage_probability) {
            return bad("LOS blockage probability must be in [0, 1]");
        }
        if self.diffuse_density < 0.0 {
            return bad("diffuse density must be nonnegative");
        }
        for [lo, hi] in [self.diffuse_gain_db, self.discrete_gain_db] {
            if !(lo <= hi && hi <= 0.0) {
                return bad("gain ranges must be ascending and at most 0 dB");
            }
        }
        let [lo, hi] = self.excess_loss_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("excess loss range must be finite and ascending");
        }
        if self.waypoint_stride == 0 {
            return bad("waypoint stride must be at least 1");
        }
        Ok(())
    }

    /// Travel time from the first to the last trajectory point.
    pub fn trajectory_duration(&self) -> f64 {
        self.tx_trajectory
            .windows(2)
            .map(|w| distance(w[0].position, w[1].position) / w[0].speed)
            .sum()
    }

    /// Tx position and velocity `t` seconds after leaving the first point.
    pub fn tx_state(&self, t: f64) -> (Point, Point) {
        let mut remaining = t.max(0.0);
        for w in self.tx_trajectory.windows(2) {
            let len = distance(w[0].position, w[1].position);
            let dur = len / w[0].speed;
            let dir = [
                (w[1].position[0] - w[0].position[0]) / len,
                (w[1].position[1] - w[0].position[1]) / len,
            ];
            let vel = [dir[0] * w[0].speed, dir[1] * w[0].speed];
            if remaining <= dur {
                let pos = [
                    w[0].position[0] + vel[0] * remaining,
                    w[0].position[1] + vel[1] * remaining,
                ];
                return (pos, vel);
            }
            remaining -= dur;
        }
        let end = self.tx_trajectory.last().expect("validated").position;
        (end, [0.0, 0.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Point,
    pub velocity: Point,
    /// Reflection coefficient magnitude in (0, 1].
    pub gain: f64,
    pub kind: PathKind,
}

impl Scatterer {
    pub fn position_at(&self, t: f64) -> Point {
        [
            self.position[0] + self.velocity[0] * t,
            self.position[1] + self.velocity[1] * t,
        ]
    }
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn log_uniform_gain(rng: &mut impl Rng, range_db: [f64; 2]) -> f64 {
    let db = if range_db[0] == range_db[1] {
        range_db[0]
    } else {
        rng.random_range(range_db[0]..range_db[1])
    };
    10f64.powf(db / 20.0)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Scatterer realization for one run. Diffuse scatterers: `floor(density * L)`
/// per wall at uniform x; static discrete uniform over the canyon floor; mobile
/// discrete on one of two lane lines, driving with the lane direction.
pub fn place_scatterers(scenario: &CanyonScenario, seed: u64) -> Result<Vec<Scatterer>> {
    scenario.validate()?;
    let mut rng = rng_from(mix_seed(seed, &[domain::SCATTERERS]));
    let length = scenario.canyon_length;
    let half = scenario.canyon_width / 2.0;
    let per_wall = (scenario.diffuse_density * length).floor() as usize;
    let mut out = Vec::with_capacity(2 * per_wall + scenario.num_static_discrete + scenario.num_mobile_discrete);

    for wall_y in [-half, half] {
        for _ in 0..per_wall {
            out.push(Scatterer {
                position: [rng.random_range(0.0..length), wall_y],
                velocity: [0.0, 0.0],
                gain: log_uniform_gain(&mut rng, scenario.diffuse_gain_db),
                kind: PathKind::Diffuse,
            });
        }
    }
    for _ in 0..scenario.num_static_discrete {
        out.push(Scatterer {
            position: [rng.random_range(0.0..length), rng.random_range(-half..half)],
            velocity: [0.0, 0.0],
            gain: log_uniform_gain(&mut rng, scenario.discrete_gain_db),
            kind: PathKind::StaticDiscrete,
        });
    }
    let [vlo, vhi] = scenario.mobile_speed_range;
    for _ in 0..scenario.num_mobile_discrete {
        // Lane at y = -w/4 drives towards +x, lane at y = +w/4 towards -x.
        let forward = rng.random_bool(0.5);
        let speed = uniform(&mut rng, vlo, vhi);
        let (y, vx) = if forward { (-half / 2.0, speed) } else { (half / 2.0, -speed) };
        out.push(Scatterer {
            position: [rng.random_range(0.0..length), y],
            velocity: [vx, 0.0],
            gain: log_uniform_gain(&mut rng, scenario.discrete_gain_db),
            kind: PathKind::MobileDiscrete,
        });
    }
    Ok(out)
}

/// Rate of change of |a - b| when `a` moves with `va` and `b` with `vb`.
fn range_rate(a: Point, va: Point, b: Point, vb: Point) -> f64 {
    let d = distance(a, b);
    if d == 0.0 {
        return 0.0;
    }
    ((a[0] - b[0]) * (va[0] - vb[0]) + (a[1] - b[1]) * (va[1] - vb[1])) / d
}

/// Kinematic state of the transmitter at the region origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxState {
    pub position: Point,
    pub velocity: Point,
}

/// Single-bounce path parameters for one Tx/Rx pair, scatterers given at their
/// current positions. Amplitudes follow free-space loss over the unfolded path
/// length times the reflection gain; the relative velocity is minus the rate of
/// change of the path length.
pub fn compute_paths(
    scenario: &CanyonScenario,
    scatterers: &[Scatterer],
    tx: TxState,
    rx: Point,
    carrier_frequency: f64,
    seed: u64,
) -> Result<Vec<PropagationPath>> {
    let los_distance = distance(tx.position, rx);
    if los_distance <= 0.0 {
        return Err(Error::InvalidScenario("Tx and Rx positions coincide".into()));
    }
    let wavelength = SPEED_OF_LIGHT / carrier_frequency;
    let mut rng = rng_from(mix_seed(seed, &[domain::PATHS]));
    let blocked = rng.random_bool(scenario.los_blockage_probability);
    let excess = 10f64.powf(-uniform(&mut rng, scenario.excess_loss_db[0], scenario.excess_loss_db[1]) / 20.0);
    let free_space = |d: f64| excess * wavelength / (4.0 * PI * d);

    let mut paths = Vec::with_capacity(scatterers.len() + 1);
    if !blocked {
        paths.push(PropagationPath::new(
            free_space(los_distance),
            rng.random_range(0.0..TAU),
            los_distance / SPEED_OF_LIGHT,
            -range_rate(tx.position, tx.velocity, rx, [0.0, 0.0]),
            PathKind::Los,
        )?);
    }
    for s in scatterers {
        let d1 = distance(tx.position, s.position);
        let d2 = distance(s.position, rx);
        if d1 == 0.0 || d2 == 0.0 {
            continue;
        }
        let rate = range_rate(s.position, s.velocity, tx.position, tx.velocity)
            + range_rate(s.position, s.velocity, rx, [0.0, 0.0]);
        paths.push(PropagationPath::new(
            free_space(d1 + d2) * s.gain,
            rng.random_range(0.0..TAU),
            (d1 + d2) / SPEED_OF_LIGHT,
            -rate,
            s.kind,
        )?);
    }
    Ok(paths)
}

/// Where a GSCM region came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GscmProvenance {
    pub run: u64,
    pub rx_index: usize,
    pub waypoint_index: usize,
    /// Stationarity-region index along the trajectory at which the Tx was frozen.
    pub trajectory_region: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GscmRegion {
    pub process: StationaryProcess,
    pub provenance: GscmProvenance,
    pub seed: u64,
}

/// One simulation run: a scatterer realization, a random start along the
/// trajectory and `regions_per_run` waypoints spaced `waypoint_stride`
/// stationarity regions apart. Returns regions ordered by (waypoint, Rx).
pub fn generate_v2i_run(
    scenario: &CanyonScenario,
    spec: &GridSpec,
    regions_per_run: usize,
    run: u64,
    master_seed: u64,
) -> Result<Vec<GscmRegion>> {
    scenario.validate()?;
    spec.validate()?;
    if regions_per_run == 0 {
        return Ok(Vec::new());
    }
    let t_stat = spec.stationarity_time();
    let step = t_stat * scenario.waypoint_stride as f64;
    let needed = step * (regions_per_run - 1) as f64 + t_stat;
    let available = scenario.trajectory_duration();
    if needed > available {
        return Err(Error::TrajectoryTooShort { needed, available });
    }
    let run_seed = mix_seed(master_seed, &[domain::RUN, run]);
    let scatterers = place_scatterers(scenario, run_seed)?;

    let slack_regions = ((available - needed) / t_stat).floor() as usize;
    let start_region = rng_from(run_seed).random_range(0..=slack_regions);

    let mut regions = Vec::with_capacity(regions_per_run * scenario.rx_positions.len());
    for waypoint in 0..regions_per_run {
        let trajectory_region = start_region + waypoint * scenario.waypoint_stride;
        let t = trajectory_region as f64 * t_stat;
        let (position, velocity) = scenario.tx_state(t);
        let current: Vec<Scatterer> = scatterers
            .iter()
            .map(|s| Scatterer { position: s.position_at(t), ..*s })
            .collect();
        for (rx_index, &rx) in scenario.rx_positions.iter().enumerate() {
            let seed = mix_seed(master_seed, &[domain::REGION, run, rx_index as u64, waypoint as u64]);
            let paths = compute_paths(scenario, &current, TxState { position, velocity }, rx, spec.carrier_frequency, seed)?;
            if paths.is_empty() {
                return Err(Error::InvalidScenario(
                    "region without any propagation path (LOS blocked, no scatterers)".into(),
                ));
            }
            let limit = scenario.max_vehicle_speed + 2.0 * scenario.mobile_speed_range[1];
            regions.push(GscmRegion {
                process: StationaryProcess::with_speed_limit(paths, *spec, limit)?,
                provenance: GscmProvenance { run, rx_index, waypoint_index: waypoint, trajectory_region },
                seed,
            });
        }
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::doppler_shift;

    fn bare() -> CanyonScenario {
        CanyonScenario {
            diffuse_density: 0.0,
            num_static_discrete: 0,
            num_mobile_discrete: 0,
            los_blockage_probability: 0.0,
            excess_loss_db: [0.0, 0.0],
            ..Default::default()
        }
    }

    #[test]
    fn excess_loss_scales_every_path() {
        let tx = TxState { position: [0.0, 0.0], velocity: [0.0, 0.0] };
        let lossy = CanyonScenario { excess_loss_db: [20.0, 20.0], ..bare() };
        let a = compute_paths(&bare(), &[], tx, [100.0, 0.0], 5.9e9, 9).unwrap();
        let b = compute_paths(&lossy, &[], tx, [100.0, 0.0], 5.9e9, 9).unwrap();
        assert!((b[0].amplitude / a[0].amplitude - 0.1).abs() < 1e-15);
        assert_eq!(a[0].phase, b[0].phase);
    }

    #[test]
    fn empty_scenario_places_nothing() {
        assert!(place_scatterers(&bare(), 1).unwrap().is_empty());
    }

    #[test]
    fn diffuse_count_is_floor_of_density_times_length_per_wall() {
        let sc = CanyonScenario { diffuse_density: 1.0, canyon_length: 100.0, ..bare() };
        let s = place_scatterers(&sc, 3).unwrap();
        assert_eq!(s.len(), 200);
        let half = sc.canyon_width / 2.0;
        assert_eq!(s.iter().filter(|s| s.position[1] == half).count(), 100);
        assert!(s.iter().all(|s| s.kind == PathKind::Diffuse && s.gain > 0.0 && s.gain <= 0.1));

        let sc = CanyonScenario { diffuse_density: 0.37, canyon_length: 100.0, ..bare() };
        assert_eq!(place_scatterers(&sc, 3).unwrap().len(), 2 * 37);
    }

    #[test]
    fn placement_is_seed_deterministic() {
        let sc = CanyonScenario::default();
        assert_eq!(place_scatterers(&sc, 42).unwrap(), place_scatterers(&sc, 42).unwrap());
        assert_ne!(place_scatterers(&sc, 42).unwrap(), place_scatterers(&sc, 43).unwrap());
    }

    #[test]
    fn zero_area_rejected() {
        let sc = CanyonScenario { canyon_width: 0.0, ..bare() };
        assert!(matches!(place_scatterers(&sc, 0), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn los_only_friis_and_delay() {
        let fc = 5.9e9;
        let tx = TxState { position: [0.0, 0.0], velocity: [0.0, 0.0] };
        let paths = compute_paths(&bare(), &[], tx, [100.0, 0.0], fc, 9).unwrap();
        assert_eq!(paths.len(), 1);
        let p = paths[0];
        assert!((p.delay - 333.564_095_198e-9).abs() < 1e-17, "{}", p.delay);
        let lambda = SPEED_OF_LIGHT / fc;
        assert!((p.amplitude - lambda / (4.0 * PI * 100.0)).abs() < 1e-18);
        assert_eq!(p.relative_velocity, 0.0);
    }

    #[test]
    fn approaching_tx_gives_positive_doppler() {
        let tx = TxState { position: [0.0, 0.0], velocity: [11.0, 0.0] };
        let p = compute_paths(&bare(), &[], tx, [100.0, 0.0], 5.9e9, 9).unwrap()[0];
        assert!((p.relative_velocity - 11.0).abs() < 1e-12);
        assert!((doppler_shift(p.relative_velocity, 5.9e9) - 216.483_097_78).abs() < 1e-6);
    }

    #[test]
    fn static_geometry_has_no_doppler() {
        let sc = CanyonScenario { num_static_discrete: 5, diffuse_density: 0.1, ..bare() };
        let scat = place_scatterers(&sc, 5).unwrap();
        let tx = TxState { position: [10.0, -3.0], velocity: [0.0, 0.0] };
        let paths = compute_paths(&sc, &scat, tx, [200.0, 10.0], 5.9e9, 1).unwrap();
        assert_eq!(paths.len(), scat.len() + 1);
        assert!(paths.iter().all(|p| p.relative_velocity == 0.0));
    }

    #[test]
    fn reflected_paths_are_longer_and_doppler_bounded() {
        let sc = CanyonScenario::default();
        let fc = 5.9e9;
        let regions = generate_v2i_run(&sc, &GridSpec::default(), 4, 0, 77).unwrap();
        // Single bounce: dL/dt = -u1.v_tx + (u1 + u2).v_s, so |v| <= |v_tx| + 2 |v_s|.
        let bound = fc * (sc.max_vehicle_speed + 2.0 * sc.mobile_speed_range[1]) / SPEED_OF_LIGHT;
        for r in &regions {
            let (tx, _) = sc.tx_state(r.provenance.trajectory_region as f64 * 0.1);
            let los = distance(tx, sc.rx_positions[r.provenance.rx_index]) / SPEED_OF_LIGHT;
            for p in r.process.paths() {
                assert!(p.delay >= los * (1.0 - 1e-12));
                assert!(p.doppler(fc).abs() <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn run_shape_and_determinism() {
        let sc = CanyonScenario::default().with_rx_row(1, 250.0, 10.0);
        let spec = GridSpec::default();
        let one = generate_v2i_run(&sc, &spec, 1, 0, 5).unwrap();
        assert_eq!(one.len(), 1);
        let sc = CanyonScenario::default();
        let a = generate_v2i_run(&sc, &spec, 3, 2, 5).unwrap();
        assert_eq!(a.len(), 3 * sc.rx_positions.len());
        assert_eq!(a, generate_v2i_run(&sc, &spec, 3, 2, 5).unwrap());
        assert_ne!(a, generate_v2i_run(&sc, &spec, 3, 3, 5).unwrap());
    }

    #[test]
    fn trajectory_too_short() {
        let sc = CanyonScenario::default();
        let duration = sc.trajectory_duration();
        let spec = GridSpec::default();
        let too_many = (duration / (0.1 * sc.waypoint_stride as f64)) as usize + 2;
        assert!(matches!(
            generate_v2i_run(&sc, &spec, too_many, 0, 1),
            Err(Error::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn trajectory_kinematics() {
        let sc = CanyonScenario::default();
        assert!((sc.trajectory_duration() - (25.0 + 31.25)).abs() < 1e-12);
        let (p, v) = sc.tx_state(30.0);
        assert!((p[0] - 290.0).abs() < 1e-9);
        assert_eq!(v, [8.0, 0.0]);
    }
}
