//! A complete simulation setup and the DDOP analysis of an epoch set.

use nalgebra::Vector3;

use crate::constants::{DEFAULT_MASK_DEG, DEFAULT_WAVELENGTH};
use crate::ddop::{
    ddop_covariance, ddop_metrics, scale_jacobian, theoretical_ellipse, AxisConvention, DdopResult, ScalingFactors,
    TheoreticalEllipse,
};
use crate::doppler::{elevation_weights, observe, NoiseModel};
use crate::estimator::{jacobian_from_states, model_jacobian, SolverConfig, StateVector};
use crate::geometry::{closest_approach_detail, geodetic_to_ecef, rtn_frame, EnuFrame, GeodeticPosition, RtnFrame};
use crate::orbit::{propagate, OrbitSource, SatelliteState};
use crate::time::{add_seconds, Epoch};
use crate::{Error, Result};

/// Margin added on both sides of the observation window when searching for
/// the closest approach, s.
pub const PASS_SEARCH_MARGIN_S: f64 = 900.0;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub source: OrbitSource,
    pub user: GeodeticPosition,
    pub window_start: Epoch,
    /// s
    pub duration_s: f64,
    /// s
    pub sample_period_s: f64,
    pub noise: NoiseModel,
    pub solver: SolverConfig,
    /// m
    pub carrier_wavelength: f64,
    pub mask_deg: f64,
    /// True `c·δ̇_d`, m/s.
    pub true_clock_drift_scaled: f64,
    /// True `δc`, s.
    pub true_time_offset: f64,
    pub axis_convention: AxisConvention,
}

impl Scenario {
    /// Scenario with default noise, solver, wavelength and mask.
    pub fn new(
        source: OrbitSource,
        user: GeodeticPosition,
        window_start: Epoch,
        duration_s: f64,
        sample_period_s: f64,
    ) -> Self {
        Self {
            source,
            user,
            window_start,
            duration_s,
            sample_period_s,
            noise: NoiseModel::default(),
            solver: SolverConfig::default(),
            carrier_wavelength: DEFAULT_WAVELENGTH,
            mask_deg: DEFAULT_MASK_DEG,
            true_clock_drift_scaled: 0.0,
            true_time_offset: 0.0,
            axis_convention: AxisConvention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.user.validate_user()?;
        self.solver.validate()?;
        if !(self.duration_s > 0.0) || !(self.sample_period_s > 0.0) {
            return Err(Error::InvalidParameter("duration and sample period must be positive".into()));
        }
        if !(self.carrier_wavelength > 0.0) {
            return Err(Error::InvalidParameter("carrier wavelength must be positive".into()));
        }
        if !(self.noise.sigma_dopp >= 0.0) {
            return Err(Error::InvalidParameter("sigma_dopp must be non-negative".into()));
        }
        if !(self.true_time_offset.abs() < 10.0) {
            return Err(Error::InvalidParameter("true time offset must be within (-10, 10) s".into()));
        }
        Ok(())
    }

    /// Number of samples: one at the start of every sample period.
    pub fn sample_count(&self) -> usize {
        (self.duration_s / self.sample_period_s + 1e-9).floor() as usize
    }

    pub fn epochs(&self) -> Vec<Epoch> {
        (0..self.sample_count())
            .map(|k| add_seconds(self.window_start, k as f64 * self.sample_period_s))
            .collect()
    }

    /// Epoch of the last sample.
    pub fn window_end(&self) -> Epoch {
        let n = self.sample_count().max(1);
        add_seconds(self.window_start, (n - 1) as f64 * self.sample_period_s)
    }

    pub fn user_ecef(&self) -> Vector3<f64> {
        geodetic_to_ecef(&self.user)
    }

    pub fn truth(&self) -> StateVector {
        StateVector::new(self.user_ecef(), self.true_clock_drift_scaled, self.true_time_offset)
    }

    /// Interval searched for the pass extremum.
    pub fn pass_search_window(&self) -> (Epoch, Epoch) {
        (
            add_seconds(self.window_start, -PASS_SEARCH_MARGIN_S),
            add_seconds(self.window_end(), PASS_SEARCH_MARGIN_S),
        )
    }

    /// Closest approach of the pass containing the observation window.
    pub fn pass_geometry(&self) -> Result<PassGeometry> {
        PassGeometry::locate(&self.source, &self.user, self.pass_search_window(), self.mask_deg)
    }

    /// DDOP analysis of `epochs` seen from the true position.
    pub fn analyze(&self, pass: &PassGeometry, epochs: &[Epoch]) -> Result<GeometryAnalysis> {
        analyze_epochs(
            &self.source,
            &self.truth(),
            pass,
            epochs,
            self.mask_deg,
            &self.solver,
            self.noise.sigma_dopp,
            self.axis_convention,
        )
    }
}

/// The closest-approach state of a pass and the frames built from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassGeometry {
    pub closest_approach: Epoch,
    pub state: SatelliteState,
    pub rtn: RtnFrame,
    pub enu: EnuFrame,
}

impl PassGeometry {
    pub fn locate(
        source: &OrbitSource,
        user: &GeodeticPosition,
        window: (Epoch, Epoch),
        mask_deg: f64,
    ) -> Result<Self> {
        let ca = closest_approach_detail(source, user, window, mask_deg)?;
        let state = propagate(source, ca.epoch)?;
        Ok(Self {
            closest_approach: ca.epoch,
            state,
            rtn: rtn_frame(&state)?,
            enu: EnuFrame::at(user),
        })
    }
}

/// DDOP figures and the along/cross-track theory of one epoch set.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryAnalysis {
    pub scaling: ScalingFactors,
    pub ddop: DdopResult,
    pub theory: TheoreticalEllipse,
    pub elevations_deg: Vec<f64>,
}

/// Linearises the model at `truth`, scales, inverts and projects onto the
/// along/cross-track axes of `pass`. `sigma_meas` is the zenith deviation in m/s.
#[allow(clippy::too_many_arguments)]
pub fn analyze_epochs(
    source: &OrbitSource,
    truth: &StateVector,
    pass: &PassGeometry,
    epochs: &[Epoch],
    mask_deg: f64,
    solver: &SolverConfig,
    sigma_meas: f64,
    convention: AxisConvention,
) -> Result<GeometryAnalysis> {
    let (states, elevations) = observe(source, truth, epochs, mask_deg)?;
    let enu = EnuFrame::at_ecef(&truth.position_ecef)?;
    let full = jacobian_from_states(truth, &states)?;
    let jac = model_jacobian(&full, &enu, solver);
    let w = elevation_weights(elevations.iter().copied())?;
    let scaling = ScalingFactors::from_radii(states.iter().map(|s| s.position.norm()))?;
    let c = ddop_covariance(&scale_jacobian(&jac, &scaling), &w)?;
    let ddop = ddop_metrics(&c, &scaling, sigma_meas);
    let theory = theoretical_ellipse(&c, &pass.rtn, &enu, sigma_meas, &scaling, 0.95, solver, convention)?;
    Ok(GeometryAnalysis {
        scaling,
        ddop,
        theory,
        elevations_deg: elevations,
    })
}
