//! Repeated noisy solves over a fixed geometry and their comparison with the
//! DDOP prediction.

use std::io::Write;

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::ddop::{chi2_2dof, ellipse_from_covariance, track_axes, AxisConvention, ConfidenceEllipse, TheoreticalEllipse};
use crate::doppler::{measurements_from_geometry, observe, NoiseModel};
use crate::estimator::{solve, SolverConfig, StateVector};
use crate::geometry::{EnuFrame, RtnFrame};
use crate::scenario::{analyze_epochs, Scenario};
use crate::{Error, Result};

/// Smallest accepted fraction of converged trials.
pub const MIN_CONVERGED_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_trials: usize,
    pub base_seed: u64,
    pub noise: NoiseModel,
    pub solver: SolverConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            base_seed: 0,
            noise: NoiseModel::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl McConfig {
    /// Monte Carlo settings taken from a scenario's noise and solver.
    pub fn from_scenario(scenario: &Scenario, n_trials: usize) -> Self {
        Self {
            n_trials,
            base_seed: scenario.noise.seed,
            noise: scenario.noise,
            solver: scenario.solver,
        }
    }
}

/// Seed of trial `index`, independent of execution order.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub converged: bool,
    pub along_m: f64,
    pub cross_m: f64,
    pub east_m: f64,
    pub north_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub n_trials: usize,
    pub converged_count: usize,
    /// Errors of converged trials, m.
    pub along_errors: Vec<f64>,
    pub cross_errors: Vec<f64>,
    /// Along/cross sample covariance, m².
    pub empirical_cov: Matrix2<f64>,
    /// `None` when the samples do not span two dimensions (noise-free runs).
    pub empirical_ellipse: Option<ConfidenceEllipse>,
    /// `None` when the measurement deviation is zero.
    pub theoretical: Option<TheoreticalEllipse>,
    /// Fraction of converged trials inside the theoretical ellipse.
    pub containment_fraction: f64,
    pub confidence: f64,
    pub trials: Vec<TrialRecord>,
}

impl McResult {
    /// Per-trial CSV. Non-converged trials have empty error fields.
    pub fn write_trials_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "converged", "along_m", "cross_m", "east_m", "north_m"])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.converged.to_string(),
                fmt_f64(t.along_m),
                fmt_f64(t.cross_m),
                fmt_f64(t.east_m),
                fmt_f64(t.north_m),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal, empty for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Horizontal position error projected onto the along-track and cross-track
/// axes derived from `rtn`.
pub fn decompose_error(est: &StateVector, truth: &StateVector, rtn: &RtnFrame, enu: &EnuFrame) -> Result<(f64, f64)> {
    decompose_error_with(est, truth, rtn, enu, AxisConvention::HorizontalProjection)
}

pub fn decompose_error_with(
    est: &StateVector,
    truth: &StateVector,
    rtn: &RtnFrame,
    enu: &EnuFrame,
    convention: AxisConvention,
) -> Result<(f64, f64)> {
    let (along, cross) = track_axes(rtn, enu, convention)?;
    let e = est.position_ecef - truth.position_ecef;
    Ok((e.dot(&along), e.dot(&cross)))
}

/// Sample covariance (divisor N−1) of paired samples.
pub fn sample_covariance(along: &[f64], cross: &[f64]) -> Result<Matrix2<f64>> {
    let n = along.len();
    if n < 2 || cross.len() != n {
        return Err(Error::DegenerateSamples);
    }
    let ma = along.iter().sum::<f64>() / n as f64;
    let mc = cross.iter().sum::<f64>() / n as f64;
    let mut cov = Matrix2::zeros();
    for (a, c) in along.iter().zip(cross) {
        let d = Vector2::new(a - ma, c - mc);
        cov += d * d.transpose();
    }
    Ok(cov / (n - 1) as f64)
}

pub fn empirical_ellipse(along: &[f64], cross: &[f64], confidence: f64) -> Result<ConfidenceEllipse> {
    let cov = sample_covariance(along, cross)?;
    ellipse_from_covariance(&cov, confidence).map_err(|e| match e {
        Error::DegenerateCovariance => Error::DegenerateSamples,
        other => other,
    })
}

/// Runs `mc.n_trials` independent noise realisations over the scenario's
/// epochs, solving each from the true state.
pub fn run_trials(scenario: &Scenario, mc: &McConfig) -> Result<McResult> {
    if mc.n_trials < 2 {
        return Err(Error::InvalidParameter("n_trials must be at least 2".into()));
    }
    mc.solver.validate()?;
    let pass = scenario.pass_geometry()?;
    let epochs = scenario.epochs();
    let truth = scenario.truth();
    let enu = EnuFrame::at_ecef(&truth.position_ecef)?;
    let (states, elevations) = observe(&scenario.source, &truth, &epochs, scenario.mask_deg)?;
    let (along_axis, cross_axis) = track_axes(&pass.rtn, &enu, scenario.axis_convention)?;
    let confidence = 0.95;

    let theoretical = if mc.noise.sigma_dopp > 0.0 {
        Some(
            analyze_epochs(
                &scenario.source,
                &truth,
                &pass,
                &epochs,
                scenario.mask_deg,
                &mc.solver,
                mc.noise.sigma_dopp,
                scenario.axis_convention,
            )?
            .theory,
        )
    } else {
        None
    };

    let run = |trial: usize| -> Result<TrialRecord> {
        let noise = NoiseModel {
            seed: trial_seed(mc.base_seed, trial as u64),
            ..mc.noise
        };
        let set = measurements_from_geometry(
            &truth,
            &epochs,
            states.clone(),
            &elevations,
            &noise,
            scenario.carrier_wavelength,
        )?;
        let failed = TrialRecord {
            trial,
            converged: false,
            along_m: f64::NAN,
            cross_m: f64::NAN,
            east_m: f64::NAN,
            north_m: f64::NAN,
        };
        match solve(&set, &scenario.source, &truth, &mc.solver) {
            Ok(sol) if sol.converged => {
                let e: Vector3<f64> = sol.estimate.position_ecef - truth.position_ecef;
                Ok(TrialRecord {
                    trial,
                    converged: true,
                    along_m: e.dot(&along_axis),
                    cross_m: e.dot(&cross_axis),
                    east_m: e.dot(&enu.east),
                    north_m: e.dot(&enu.north),
                })
            }
            Ok(_) => Ok(failed),
            Err(err) if err.is_numerical() => Ok(failed),
            Err(err) => Err(err),
        }
    };
    let trials: Vec<TrialRecord> = (0..mc.n_trials).into_par_iter().map(run).collect::<Result<_>>()?;

    let ok: Vec<&TrialRecord> = trials.iter().filter(|t| t.converged).collect();
    let converged_count = ok.len();
    if (converged_count as f64) < MIN_CONVERGED_FRACTION * mc.n_trials as f64 || converged_count < 2 {
        return Err(Error::TooFewConverged {
            converged: converged_count,
            trials: mc.n_trials,
        });
    }
    let along_errors: Vec<f64> = ok.iter().map(|t| t.along_m).collect();
    let cross_errors: Vec<f64> = ok.iter().map(|t| t.cross_m).collect();
    let empirical_cov = sample_covariance(&along_errors, &cross_errors)?;
    let empirical = ellipse_from_covariance(&empirical_cov, confidence).ok();

    let containment_fraction = match &theoretical {
        Some(th) => match th.covariance.try_inverse() {
            Some(inv) => {
                let k = chi2_2dof(confidence);
                let inside = along_errors
                    .iter()
                    .zip(&cross_errors)
                    .filter(|(a, c)| {
                        let d = Vector2::new(**a, **c);
                        (d.transpose() * inv * d)[0] <= k
                    })
                    .count();
                inside as f64 / converged_count as f64
            }
            None => f64::NAN,
        },
        None => f64::NAN,
    };

    Ok(McResult {
        n_trials: mc.n_trials,
        converged_count,
        along_errors,
        cross_errors,
        empirical_cov,
        empirical_ellipse: empirical,
        theoretical,
        containment_fraction,
        confidence,
        trials,
    })
}
