mod common;

use common::*;
use leodop_core::ddop::*;
use leodop_core::doppler::{elevation_weights, generate_measurements, observe, NoiseModel};
use leodop_core::estimator::{jacobian_from_states, model_jacobian, wls_step, SolverConfig};
use leodop_core::geometry::EnuFrame;
use leodop_core::time::epoch_grid;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

// γ = 1/(1 − r_e/a)·√(μ/a³), η = (r_e/a)/(1 − r_e/a)·μ/a², evaluated at
// 50 significant digits for a = 7086 km, r_e = 6371 km, μ = 3.986004418e14.
const GAMMA_7086: f64 = 0.010489680780908141828;
const ETA_7086: f64 = 70.73543734046718429;

#[test]
fn scaling_factors_match_hand_evaluation() {
    let s = ScalingFactors::new(7086e3).unwrap();
    assert!(rel_err(s.gamma, GAMMA_7086) < 1e-12, "gamma {}", s.gamma);
    assert!(rel_err(s.eta, ETA_7086) < 1e-12, "eta {}", s.eta);
}

/// Scaled Jacobian, weights and solver of 20 epochs of the fixture pass.
fn fixture_geometry() -> (DMatrix<f64>, DVector<f64>, ScalingFactors) {
    let sc = fixture_scenario();
    let truth = sc.truth();
    let epochs = epoch_grid(sc.window_start, 17.5, 20);
    let (states, elev) = observe(&sc.source, &truth, &epochs, sc.mask_deg).unwrap();
    let enu = EnuFrame::at_ecef(&truth.position_ecef).unwrap();
    let j = model_jacobian(&jacobian_from_states(&truth, &states).unwrap(), &enu, &sc.solver);
    let s = ScalingFactors::from_radii(states.iter().map(|s| s.position.norm())).unwrap();
    (scale_jacobian(&j, &s), elevation_weights(elev).unwrap(), s)
}

#[test]
fn covariance_is_symmetric_positive_definite() {
    let (h, w, _) = fixture_geometry();
    let c = ddop_covariance(&h, &w).unwrap();
    assert!((&c - c.transpose()).abs().max() <= 1e-12 * c.abs().max());
    assert!(c.clone().cholesky().is_some());
}

#[test]
fn covariance_inverts_normal_matrix() {
    let (h, w, _) = fixture_geometry();
    let c = ddop_covariance(&h, &w).unwrap();
    let n = h.transpose() * DMatrix::from_diagonal(&w) * &h;
    let eye = &n * &c;
    assert!((eye - DMatrix::identity(4, 4)).abs().max() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn row_permutation_leaves_metrics_unchanged(seed in any::<u64>()) {
        let (h, w, s) = fixture_geometry();
        let m = h.nrows();
        let mut order: Vec<usize> = (0..m).collect();
        let mut x = seed;
        for i in (1..m).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (x >> 33) as usize % (i + 1));
        }
        let hp = DMatrix::from_fn(m, h.ncols(), |i, j| h[(order[i], j)]);
        let wp = DVector::from_fn(m, |i, _| w[order[i]]);
        let a = ddop_metrics(&ddop_covariance(&h, &w).unwrap(), &s, 0.5);
        let b = ddop_metrics(&ddop_covariance(&hp, &wp).unwrap(), &s, 0.5);
        for (x, y) in [(a.hddop, b.hddop), (a.cddop, b.cddop), (a.tddop, b.tddop)] {
            prop_assert!(rel_err(x, y) < 1e-9);
        }
    }

    #[test]
    fn sigma_scales_dimensional_values_only(sigma in 0.01f64..10.0) {
        let (h, w, s) = fixture_geometry();
        let c = ddop_covariance(&h, &w).unwrap();
        let a = ddop_metrics(&c, &s, sigma);
        let b = ddop_metrics(&c, &s, 2.0 * sigma);
        prop_assert_eq!(a.hddop, b.hddop);
        prop_assert!(rel_err(b.position_sigma, 2.0 * a.position_sigma) < 1e-12);
        prop_assert!(rel_err(b.time_offset_sigma, 2.0 * a.time_offset_sigma) < 1e-12);
        prop_assert!(rel_err(b.drift_sigma, 2.0 * a.drift_sigma) < 1e-12);
    }

    #[test]
    fn weight_scaling_divides_dops(alpha in 0.1f64..10.0) {
        let (h, w, s) = fixture_geometry();
        let a = ddop_metrics(&ddop_covariance(&h, &w).unwrap(), &s, 1.0);
        let b = ddop_metrics(&ddop_covariance(&h, &(&w * (alpha * alpha))).unwrap(), &s, 1.0);
        prop_assert!(rel_err(b.hddop * alpha, a.hddop) < 1e-9);
        prop_assert!(rel_err(b.tddop * alpha, a.tddop) < 1e-9);
        prop_assert!(rel_err(b.cddop / b.hddop, a.cddop / a.hddop) < 1e-9);
    }
}

#[test]
fn rank_deficient_geometry_names_direction() {
    let (mut h, w, _) = fixture_geometry();
    let col = h.column(0).clone_owned();
    h.set_column(1, &(col * 3.0));
    match ddop_covariance(&h, &w) {
        Err(leodop_core::Error::SingularGeometry { direction }) => {
            // column 1 = 3·column 0, so the null direction is ∝ (3, −1, 0, 0)
            let d = DVector::from_vec(direction);
            assert!((d[0] + 3.0 * d[1]).abs() < 1e-6);
            assert!(d[2].abs() < 1e-6 && d[3].abs() < 1e-6);
        }
        other => panic!("expected SingularGeometry, got {other:?}"),
    }
}

/// Linearised estimation errors over many noise draws reproduce the DDOP
/// covariance once unscaled: `Cov(S⁻¹Δθ) ≈ σ²·C`.
#[test]
fn covariance_matches_linear_monte_carlo() {
    let sc = fixture_scenario();
    let truth = sc.truth();
    let epochs = epoch_grid(sc.window_start, 17.5, 20);
    let (states, elev) = observe(&sc.source, &truth, &epochs, sc.mask_deg).unwrap();
    let enu = EnuFrame::at_ecef(&truth.position_ecef).unwrap();
    let j = model_jacobian(&jacobian_from_states(&truth, &states).unwrap(), &enu, &sc.solver);
    let s = ScalingFactors::from_radii(states.iter().map(|s| s.position.norm())).unwrap();
    let w = elevation_weights(elev.iter().copied()).unwrap();
    let c = ddop_covariance(&scale_jacobian(&j, &s), &w).unwrap();
    let scales = s.column_scales(4);
    let clean = leodop_core::doppler::predict_from_states(&states, &truth).unwrap();

    let sigma = 0.5;
    let n = 5000;
    let mut samples = DMatrix::zeros(n, 4);
    for trial in 0..n {
        let noise = NoiseModel {
            sigma_dopp: sigma,
            elevation_scaled: true,
            seed: trial as u64,
        };
        let set = generate_measurements(&sc.source, &truth, &epochs, &noise, sc.mask_deg, sc.carrier_wavelength).unwrap();
        let dz = set.observations() - &clean;
        let delta = wls_step(&j, &w, &dz).unwrap();
        for k in 0..4 {
            samples[(trial, k)] = delta[k] / scales[k];
        }
    }
    let mean = samples.row_mean();
    let centred = DMatrix::from_fn(n, 4, |i, k| samples[(i, k)] - mean[k]);
    let emp = centred.transpose() * &centred / (n as f64 - 1.0) / (sigma * sigma);
    for a in 0..4 {
        assert!(rel_err(emp[(a, a)], c[(a, a)]) < 0.1, "entry ({a},{a}): {} vs {}", emp[(a, a)], c[(a, a)]);
        for b in 0..a {
            let scale = (c[(a, a)] * c[(b, b)]).sqrt();
            assert!((emp[(a, b)] - c[(a, b)]).abs() < 0.1 * scale, "entry ({a},{b})");
        }
    }
}

#[test]
fn fixture_theory_is_elongated() {
    let sc = fixture_scenario();
    let pass = sc.pass_geometry().unwrap();
    let a = sc.analyze(&pass, &sc.epochs()).unwrap();
    let e = a.theory.ellipse;
    assert!(e.semi_minor > 10.0 && e.semi_minor < 100.0, "minor {}", e.semi_minor);
    assert!(e.semi_major > 1e3 && e.semi_major < 1e5, "major {}", e.semi_major);
    let ratio = e.semi_major / e.semi_minor;
    assert!((1e2..1e3).contains(&ratio), "ratio {ratio}");
    assert_eq!(a.ddop.pddop, a.ddop.hddop);
}

#[test]
fn ellipse_axes_follow_chi_square() {
    let sc = fixture_scenario();
    let pass = sc.pass_geometry().unwrap();
    let th = sc.analyze(&pass, &sc.epochs()).unwrap().theory;
    let cov = th.covariance;
    let tr = cov.trace();
    let det = cov.determinant();
    let disc = (tr * tr / 4.0 - det).sqrt();
    let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
    assert!(rel_err(th.ellipse.semi_major, (5.991 * l1).sqrt()) < 1e-9);
    assert!(rel_err(th.ellipse.semi_minor, (5.991 * l2).sqrt()) < 1e-6);
}

#[test]
fn hddop_bounds_projected_errors() {
    // along² + cross² ≤ HDDOP²·σ²/γ² for both vertical constraints
    for solver in [SolverConfig::default(), fixture_scenario().solver] {
        let mut sc = fixture_scenario();
        sc.solver = solver;
        let pass = sc.pass_geometry().unwrap();
        let a = sc.analyze(&pass, &sc.epochs()).unwrap();
        let lhs = a.ddop.hddop.powi(2);
        let rhs = (a.theory.along_sigma.powi(2) + a.theory.cross_sigma.powi(2)) * (a.scaling.gamma / 0.5).powi(2);
        assert!(lhs >= rhs * (1.0 - 1e-9), "{lhs} < {rhs}");
    }
}
