#![allow(dead_code)]

use leodop_core::estimator::{SolverConfig, StateVector, VerticalConstraint};
use leodop_core::geometry::{geodetic_to_ecef, GeodeticPosition};
use leodop_core::orbit::{parse_tle, CircularOrbit, OrbitSource};
use leodop_core::scenario::Scenario;
use leodop_core::time::{parse_iso, Epoch};

pub const FIXTURE_TLE: &str = include_str!("../fixtures/orbcomm_sample.tle");

pub fn barcelona() -> GeodeticPosition {
    GeodeticPosition::new(41.3976, 2.1497, 60.0)
}

pub fn window_start() -> Epoch {
    parse_iso("2025-04-14T17:30:27Z").unwrap()
}

pub fn fixture_source() -> OrbitSource {
    OrbitSource::from_tle(parse_tle(FIXTURE_TLE).unwrap().remove(0)).unwrap()
}

/// The fixture pass: 350 s at 1 s, σ = 0.5 m/s, ECEF z held fixed.
pub fn fixture_scenario() -> Scenario {
    let mut sc = Scenario::new(fixture_source(), barcelona(), window_start(), 350.0, 1.0);
    sc.solver.vertical_constraint = VerticalConstraint::EcefZ;
    sc
}

pub fn local_up() -> SolverConfig {
    SolverConfig::default()
}

pub fn truth_at(user: &GeodeticPosition) -> StateVector {
    StateVector::new(geodetic_to_ecef(user), 0.0, 0.0)
}

pub fn synthetic(user: GeodeticPosition, altitude_m: f64, heading_deg: f64, offset_m: f64) -> OrbitSource {
    OrbitSource::SyntheticCircular(CircularOrbit::new(user, altitude_m, heading_deg, offset_m, window_start()).unwrap())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
