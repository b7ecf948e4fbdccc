mod common;

use common::*;
use leodop_core::ddop::AxisConvention;
use leodop_core::estimator::StateVector;
use leodop_core::geometry::EnuFrame;
use leodop_core::montecarlo::*;
use leodop_core::scenario::Scenario;
use proptest::prelude::*;

/// The fixture pass sampled every 10 s.
fn coarse() -> Scenario {
    let mut sc = fixture_scenario();
    sc.sample_period_s = 10.0;
    sc
}

#[test]
fn noiseless_trials_are_exact() {
    let mut sc = coarse();
    sc.noise.sigma_dopp = 0.0;
    let r = run_trials(&sc, &McConfig::from_scenario(&sc, 20)).unwrap();
    assert_eq!(r.converged_count, 20);
    assert!(r.along_errors.iter().chain(&r.cross_errors).all(|e| e.abs() < 1e-3));
    assert!(r.empirical_cov.abs().max() < 1e-6);
    assert!(r.theoretical.is_none());
}

#[test]
fn identical_across_thread_counts() {
    let sc = coarse();
    let mc = McConfig::from_scenario(&sc, 64);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trials(&sc, &mc).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_trials_csv(&mut ca).unwrap();
    b.write_trials_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn seed_changes_results() {
    let sc = coarse();
    let mut mc = McConfig::from_scenario(&sc, 8);
    let a = run_trials(&sc, &mc).unwrap();
    mc.base_seed = 99;
    let b = run_trials(&sc, &mc).unwrap();
    assert_ne!(a.along_errors, b.along_errors);
}

#[test]
fn cloud_agrees_with_theory() {
    // small-noise regime: the linearisation holds across the whole cloud
    let mut sc = coarse();
    sc.noise.sigma_dopp = 0.05;
    let r = run_trials(&sc, &McConfig::from_scenario(&sc, 400)).unwrap();
    assert_eq!(r.converged_count, 400);
    let th = r.theoretical.unwrap().ellipse;
    let emp = r.empirical_ellipse.unwrap();
    assert!(rel_err(emp.semi_major, th.semi_major) < 0.15, "{emp:?} vs {th:?}");
    assert!(rel_err(emp.semi_minor, th.semi_minor) < 0.15, "{emp:?} vs {th:?}");
    assert!((0.9..=0.99).contains(&r.containment_fraction), "{}", r.containment_fraction);
}

#[test]
fn csv_has_one_row_per_trial() {
    let sc = coarse();
    let r = run_trials(&sc, &McConfig::from_scenario(&sc, 5)).unwrap();
    let mut out = Vec::new();
    r.write_trials_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,converged,along_m,cross_m,east_m,north_m");
    assert_eq!(lines.len(), 6);
}

#[test]
fn rejects_single_trial() {
    let sc = coarse();
    assert!(run_trials(&sc, &McConfig::from_scenario(&sc, 1)).is_err());
}

proptest! {
    #[test]
    fn horizontal_errors_split_by_pythagoras(e in -1e4f64..1e4, n in -1e4f64..1e4, u in -1e3f64..1e3) {
        let sc = fixture_scenario();
        let pass = sc.pass_geometry().unwrap();
        let truth = sc.truth();
        let enu = EnuFrame::at_ecef(&truth.position_ecef).unwrap();
        let est = StateVector::new(truth.position_ecef + enu.east * e + enu.north * n + enu.up * u, 0.0, 0.0);
        let (a, c) = decompose_error(&est, &truth, &pass.rtn, &enu).unwrap();
        let h2 = e * e + n * n;
        prop_assert!(((a * a + c * c) - h2).abs() <= 1e-9 * h2.max(1.0));
    }
}

#[test]
fn decomposition_of_pure_along_error() {
    let sc = fixture_scenario();
    let pass = sc.pass_geometry().unwrap();
    let truth = sc.truth();
    let enu = EnuFrame::at_ecef(&truth.position_ecef).unwrap();
    let (along, _) = leodop_core::ddop::track_axes(&pass.rtn, &enu, AxisConvention::HorizontalProjection).unwrap();
    let est = StateVector::new(truth.position_ecef + along * 25.0, 0.0, 0.0);
    let (a, c) = decompose_error(&est, &truth, &pass.rtn, &enu).unwrap();
    assert!((a - 25.0).abs() < 1e-9 && c.abs() < 1e-9);
    let zero = decompose_error(&truth, &truth, &pass.rtn, &enu).unwrap();
    assert_eq!(zero, (0.0, 0.0));
}
