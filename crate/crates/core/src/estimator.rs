//! Measurement Jacobian and iterative weighted least squares.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::ddop::ScalingFactors;
use crate::doppler::{predict_from_states, propagate_states, weights, MeasurementSet};
use crate::geometry::EnuFrame;
use crate::orbit::{OrbitSource, SatelliteState};
use crate::{Error, Result};

/// Unknowns `θ = [r, c·δ̇_d, δc]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    /// User position, ECEF, m.
    pub position_ecef: Vector3<f64>,
    /// Receiver clock drift pre-multiplied by the speed of light, m/s.
    pub clock_drift_scaled: f64,
    /// Along-track time offset of the ephemeris, s.
    pub time_offset: f64,
}

impl StateVector {
    pub fn new(position_ecef: Vector3<f64>, clock_drift_scaled: f64, time_offset: f64) -> Self {
        Self {
            position_ecef,
            clock_drift_scaled,
            time_offset,
        }
    }

    /// Clock drift in s/s.
    pub fn clock_drift(&self) -> f64 {
        self.clock_drift_scaled / crate::constants::SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// `[r_x, r_y, r_z, c·δ̇_d, δc]`
    Full5State,
    /// Two horizontal position coordinates plus clock drift and time offset.
    Horizontal4State,
}

/// How the fixed vertical coordinate of the 4-state mode is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalConstraint {
    /// Position moves in the east/north plane of the initial guess.
    LocalUp,
    /// ECEF z is held fixed; x and y are estimated.
    EcefZ,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Threshold on the norm of the step in scaled (m/s) units.
    pub step_tolerance: f64,
    pub mode: SolveMode,
    pub vertical_constraint: VerticalConstraint,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 25,
            step_tolerance: 1e-4,
            mode: SolveMode::Horizontal4State,
            vertical_constraint: VerticalConstraint::LocalUp,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.step_tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1 and step_tolerance > 0".into(),
            ));
        }
        Ok(())
    }

    /// Number of estimated unknowns.
    pub fn unknowns(&self) -> usize {
        match self.mode {
            SolveMode::Full5State => 5,
            SolveMode::Horizontal4State => 4,
        }
    }

    /// Maps the position columns of the estimated state onto ECEF
    /// directions (3×p, p = 3 or 2).
    pub fn position_basis(&self, frame: &EnuFrame) -> DMatrix<f64> {
        match (self.mode, self.vertical_constraint) {
            (SolveMode::Full5State, _) => DMatrix::identity(3, 3),
            (SolveMode::Horizontal4State, VerticalConstraint::LocalUp) => {
                DMatrix::from_columns(&[
                    DVector::from_column_slice(frame.east.as_slice()),
                    DVector::from_column_slice(frame.north.as_slice()),
                ])
            }
            (SolveMode::Horizontal4State, VerticalConstraint::EcefZ) => DMatrix::identity(3, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub estimate: StateVector,
    pub iterations: usize,
    pub converged: bool,
    /// `sqrt(Δzᵀ W Δz)` at the estimate, m/s.
    pub weighted_residual_norm: f64,
    /// Jacobian of the estimated unknowns at the estimate (M×k).
    pub jacobian_at_solution: DMatrix<f64>,
    /// Condition number of the column-equilibrated normal matrix.
    pub normal_matrix_condition: f64,
    /// Scaled norm of the last update.
    pub last_step_norm: f64,
}

/// Analytic Jacobian rows for states already propagated at `t_i − θ.δc`.
///
/// Columns: `∂ρ̇/∂r_x, ∂ρ̇/∂r_y, ∂ρ̇/∂r_z, 1, ∂ρ̇/∂δc`.
pub fn jacobian_from_states(theta: &StateVector, states: &[SatelliteState]) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(states.len(), 5);
    for (i, s) in states.iter().enumerate() {
        if !s.acceleration.iter().all(|a| a.is_finite()) {
            return Err(Error::MissingAcceleration);
        }
        let los = theta.position_ecef - s.position;
        let d = los.norm();
        if d < 1e-3 {
            return Err(Error::CoincidentPoints);
        }
        let u = los / d;
        let v = s.velocity;
        let vu = v.dot(&u);
        // -v/d plus the projection correction (v·(r − r_s))(r − r_s)/d³
        let dr = (-v + u * vu) / d;
        j[(i, 0)] = dr.x;
        j[(i, 1)] = dr.y;
        j[(i, 2)] = dr.z;
        j[(i, 3)] = 1.0;
        // a·u − |v|²/d + (v·u)²/d
        j[(i, 4)] = s.acceleration.dot(&u) - v.norm_squared() / d + vu * vu / d;
    }
    Ok(j)
}

/// Jacobian of the stacked model at `theta`, re-propagating the satellite
/// at each measurement epoch minus `theta.time_offset`.
pub fn jacobian(theta: &StateVector, set: &MeasurementSet, source: &OrbitSource) -> Result<DMatrix<f64>> {
    let states = propagate_states(source, theta, &set.epochs())?;
    jacobian_from_states(theta, &states)
}

/// Restricts an M×5 Jacobian to the horizontal 4-state parameterisation.
pub fn reduce_jacobian(j: &DMatrix<f64>, frame: &EnuFrame, config: &SolverConfig) -> DMatrix<f64> {
    let m = j.nrows();
    let mut out = DMatrix::zeros(m, 4);
    match config.vertical_constraint {
        VerticalConstraint::LocalUp => {
            let pos = j.columns(0, 3);
            let east = Vector3::from(frame.east);
            let north = Vector3::from(frame.north);
            out.set_column(0, &(pos * east));
            out.set_column(1, &(pos * north));
        }
        VerticalConstraint::EcefZ => {
            out.set_column(0, &j.column(0));
            out.set_column(1, &j.column(1));
        }
    }
    out.set_column(2, &j.column(3));
    out.set_column(3, &j.column(4));
    out
}

/// Jacobian of whichever unknowns `config` estimates.
pub fn model_jacobian(full: &DMatrix<f64>, frame: &EnuFrame, config: &SolverConfig) -> DMatrix<f64> {
    match config.mode {
        SolveMode::Full5State => full.clone(),
        SolveMode::Horizontal4State => reduce_jacobian(full, frame, config),
    }
}

/// Condition number of the column-equilibrated normal matrix `JᵀWJ`.
pub fn normal_condition(j: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let a = weighted_equilibrated(j, w).0;
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

/// `√W·J` with columns scaled to unit norm, and the column scales.
fn weighted_equilibrated(j: &DMatrix<f64>, w: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = j.clone();
    for (mut row, wi) in a.row_iter_mut().zip(w.iter()) {
        row *= wi.sqrt();
    }
    let scales = DVector::from_iterator(
        a.ncols(),
        a.column_iter().map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        }),
    );
    for (mut col, s) in a.column_iter_mut().zip(scales.iter()) {
        col /= *s;
    }
    (a, scales)
}

/// Largest normal-matrix condition number accepted by [`wls_step`].
pub const MAX_NORMAL_CONDITION: f64 = 1e14;

/// Solves `min ‖√W (J Δ − Δz)‖` by SVD of the column-equilibrated weighted
/// Jacobian, i.e. the normal equations `(JᵀWJ) Δ = JᵀW Δz` without forming
/// or inverting `JᵀWJ`.
pub fn wls_step(j: &DMatrix<f64>, w: &DVector<f64>, residuals: &DVector<f64>) -> Result<DVector<f64>> {
    let (a, scales) = weighted_equilibrated(j, w);
    let b = DVector::from_iterator(residuals.len(), residuals.iter().zip(w.iter()).map(|(r, wi)| r * wi.sqrt()));
    let svd = a.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let condition = if min > 0.0 { (max / min).powi(2) } else { f64::INFINITY };
    if !(condition < MAX_NORMAL_CONDITION) {
        return Err(Error::SingularNormalMatrix { condition });
    }
    let y = svd
        .solve(&b, 0.0)
        .map_err(|_| Error::SingularNormalMatrix { condition })?;
    Ok(y.component_div(&scales))
}

/// Iterated Gauss-Newton weighted least squares.
///
/// Satellite states are re-propagated with the current time-offset estimate
/// on every iteration. Weights come from the measurement elevations and stay
/// fixed. In the horizontal mode the position moves in the east/north plane
/// of the initial guess (or the ECEF x/y plane).
pub fn solve(
    set: &MeasurementSet,
    source: &OrbitSource,
    initial: &StateVector,
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    let k = config.unknowns();
    if set.len() < k {
        return Err(Error::InvalidParameter(format!(
            "{} measurements for {k} unknowns",
            set.len()
        )));
    }
    let w = weights(set)?;
    let z = set.observations();
    let epochs = set.epochs();
    let frame = EnuFrame::at_ecef(&initial.position_ecef)?;
    let basis = config.position_basis(&frame);
    let p = basis.ncols();
    let scaling = ScalingFactors::new(source.semi_major_axis())?;

    let mut theta = *initial;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_step_norm = f64::INFINITY;
    let mut condition;

    loop {
        let states = propagate_states(source, &theta, &epochs)?;
        let h = predict_from_states(&states, &theta)?;
        let full = jacobian_from_states(&theta, &states)?;
        let jac = model_jacobian(&full, &frame, config);
        condition = normal_condition(&jac, &w);

        if converged || iterations == config.max_iterations {
            let r = &z - h;
            let wrn = r.iter().zip(w.iter()).map(|(ri, wi)| wi * ri * ri).sum::<f64>().sqrt();
            return Ok(SolveResult {
                estimate: theta,
                iterations,
                converged,
                weighted_residual_norm: wrn,
                jacobian_at_solution: jac,
                normal_matrix_condition: condition,
                last_step_norm,
            });
        }

        let delta = wls_step(&jac, &w, &(&z - h))?;
        iterations += 1;

        let dpos = &basis * delta.rows(0, p);
        theta.position_ecef += Vector3::new(dpos[0], dpos[1], dpos[2]);
        theta.clock_drift_scaled += delta[p];
        theta.time_offset += delta[p + 1];

        last_step_norm = scaled_step_norm(&delta, p, &scaling);
        if !last_step_norm.is_finite() || theta.time_offset.abs() >= 10.0 {
            return Err(Error::DidNotConverge { iterations });
        }
        converged = last_step_norm < config.step_tolerance;
    }
}

/// `‖S⁻¹Δ‖` with position scaled by γ and time offset by η (m/s units).
fn scaled_step_norm(delta: &DVector<f64>, p: usize, s: &ScalingFactors) -> f64 {
    let pos: f64 = delta.rows(0, p).iter().map(|d| (s.gamma * d).powi(2)).sum();
    (pos + delta[p].powi(2) + (s.eta * delta[p + 1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_iso;

    #[test]
    fn orthogonal_los_without_acceleration() {
        let theta = StateVector::new(Vector3::new(6.4e6, 0.0, 0.0), 0.0, 0.0);
        let s = SatelliteState {
            epoch: parse_iso("2025-01-01T00:00:00Z").unwrap(),
            position: Vector3::new(7.1e6, 0.0, 0.0),
            velocity: Vector3::new(0.0, 7000.0, 2000.0),
            acceleration: Vector3::zeros(),
        };
        let j = jacobian_from_states(&theta, &[s]).unwrap();
        let d = 0.7e6;
        assert!((j[(0, 0)] - 0.0).abs() < 1e-18);
        assert!((j[(0, 1)] + 7000.0 / d).abs() < 1e-15);
        assert!((j[(0, 2)] + 2000.0 / d).abs() < 1e-15);
        assert_eq!(j[(0, 3)], 1.0);

        let missing = SatelliteState {
            acceleration: Vector3::new(f64::NAN, 0.0, 0.0),
            ..s
        };
        assert!(matches!(
            jacobian_from_states(&theta, &[missing]),
            Err(Error::MissingAcceleration)
        ));
    }

    #[test]
    fn zero_residual_gives_zero_step() {
        let j = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.5, 1.0, 0.2, 0.3, 0.0, 1.0, 1.0, 1.0]);
        let w = DVector::from_element(5, 1.0);
        let step = wls_step(&j, &w, &DVector::zeros(5)).unwrap();
        assert!(step.norm() == 0.0);
    }

    #[test]
    fn orthonormal_columns_project() {
        let q = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let r = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let w = DVector::from_element(4, 1.0);
        let step = wls_step(&q, &w, &r).unwrap();
        assert!((step - q.transpose() * &r).norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let w = DVector::from_element(3, 1.0);
        assert!(matches!(
            wls_step(&j, &w, &DVector::from_element(3, 1.0)),
            Err(Error::SingularNormalMatrix { .. })
        ));
    }

    #[test]
    fn ecef_z_reduction_drops_column() {
        let j = DMatrix::from_fn(3, 5, |i, c| (i * 5 + c) as f64);
        let cfg = SolverConfig {
            vertical_constraint: VerticalConstraint::EcefZ,
            ..Default::default()
        };
        let frame = EnuFrame::at(&crate::geometry::GeodeticPosition::new(10.0, 20.0, 0.0));
        let r = reduce_jacobian(&j, &frame, &cfg);
        for i in 0..3 {
            assert_eq!(r[(i, 0)], j[(i, 0)]);
            assert_eq!(r[(i, 1)], j[(i, 1)]);
            assert_eq!(r[(i, 2)], j[(i, 3)]);
            assert_eq!(r[(i, 3)], j[(i, 4)]);
        }
    }
}
