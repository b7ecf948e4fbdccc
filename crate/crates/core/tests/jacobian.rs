mod common;

use common::*;
use leodop_core::doppler::{predict_series, propagate_states};
use leodop_core::estimator::{jacobian_from_states, StateVector};
use leodop_core::geometry::{geodetic_to_ecef, GeodeticPosition};
use leodop_core::orbit::OrbitSource;
use leodop_core::time::{add_seconds, epoch_grid, Epoch};
use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;

/// Central differences of the forward model, one column per unknown.
fn numeric_jacobian(source: &OrbitSource, theta: &StateVector, epochs: &[Epoch]) -> DMatrix<f64> {
    let m = epochs.len();
    let mut j = DMatrix::zeros(m, 5);
    let eval = |t: &StateVector| predict_series(source, &t.position_ecef, t, epochs).unwrap();
    for col in 0..5 {
        let h = if col < 3 { 1.0 } else { 1e-3 };
        let mut plus = *theta;
        let mut minus = *theta;
        match col {
            0..=2 => {
                plus.position_ecef[col] += h;
                minus.position_ecef[col] -= h;
            }
            3 => {
                plus.clock_drift_scaled += h;
                minus.clock_drift_scaled -= h;
            }
            _ => {
                plus.time_offset += h;
                minus.time_offset -= h;
            }
        }
        let (fp, fm) = (eval(&plus), eval(&minus));
        for i in 0..m {
            j[(i, col)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

/// Largest column-wise relative difference.
fn column_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (0..5)
        .map(|c| (analytic.column(c) - numeric.column(c)).norm() / numeric.column(c).norm())
        .fold(0.0, f64::max)
}

fn check(source: &OrbitSource, theta: &StateVector, epochs: &[Epoch]) -> f64 {
    let states = propagate_states(source, theta, epochs).unwrap();
    let analytic = jacobian_from_states(theta, &states).unwrap();
    column_error(&analytic, &numeric_jacobian(source, theta, epochs))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_columns_match_central_differences(
        lat in -70.0f64..70.0,
        lon in -180.0f64..180.0,
        altitude in 400e3f64..1500e3,
        heading in 0.0f64..360.0,
        offset in -1500e3f64..1500e3,
        start in -300.0f64..100.0,
        drift in -500.0f64..500.0,
        delta_c in -5.0f64..5.0,
        dx in -2e3f64..2e3,
        dy in -2e3f64..2e3,
    ) {
        let user = GeodeticPosition::new(lat, lon, 0.0);
        let source = synthetic(user, altitude, heading, offset);
        let epochs = epoch_grid(add_seconds(window_start(), start), 20.0, 10);
        let theta = StateVector::new(geodetic_to_ecef(&user) + Vector3::new(dx, dy, 0.0), drift, delta_c);
        let err = check(&source, &theta, &epochs);
        prop_assert!(err < 1e-6, "relative column error {err:e}");
    }
}

#[test]
fn tle_geometry_columns() {
    let source = fixture_source();
    let theta = StateVector::new(geodetic_to_ecef(&barcelona()), 120.0, 0.8);
    let epochs = epoch_grid(window_start(), 35.0, 10);
    let err = check(&source, &theta, &epochs);
    // SGP4 velocity is not the exact derivative of SGP4 position
    assert!(err < 1e-5, "relative column error {err:e}");
}

#[test]
fn clock_column_is_one() {
    let source = fixture_source();
    let theta = truth_at(&barcelona());
    let states = propagate_states(&source, &theta, &epoch_grid(window_start(), 50.0, 7)).unwrap();
    let j = jacobian_from_states(&theta, &states).unwrap();
    assert!(j.column(3).iter().all(|&v| v == 1.0));
}
