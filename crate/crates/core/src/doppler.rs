//! Range-rate measurement model.
//!
//! Doppler is carried in m/s as a range rate, `ρ̇ = −λ f_D`. The model for a
//! static user is
//!
//! ```text
//! ρ̇(t) = −v_s(t − δc) · (r − r_s(t − δc)) / ‖r − r_s(t − δc)‖ + c·δ̇_d
//! ```
//!
//! with the clock term carried pre-multiplied by `c` (m/s).

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::estimator::StateVector;
use crate::geometry::EnuFrame;
use crate::orbit::{propagate_with_offset, OrbitSource, SatelliteState};
use crate::time::Epoch;
use crate::{Error, Result};

/// One range-rate observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerMeasurement {
    pub epoch: Epoch,
    /// m/s
    pub range_rate: f64,
    /// Elevation of the satellite seen from the user, degrees.
    pub elevation_deg: f64,
    /// Standard deviation of this observation, m/s.
    pub sigma: f64,
}

/// `M` stacked observations with the satellite states they were generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub measurements: Vec<DopplerMeasurement>,
    pub satellite_states: Vec<SatelliteState>,
    /// Carrier wavelength, m.
    pub carrier_wavelength: f64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn epochs(&self) -> Vec<Epoch> {
        self.measurements.iter().map(|m| m.epoch).collect()
    }

    pub fn observations(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.measurements.iter().map(|m| m.range_rate))
    }
}

/// Measurement noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Zenith standard deviation, m/s.
    pub sigma_dopp: f64,
    /// Scale the deviation by `1/sin(E)`.
    pub elevation_scaled: bool,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_dopp: 0.5,
            elevation_scaled: true,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// Standard deviation at elevation `elevation_deg`, m/s.
    pub fn sigma_at(&self, elevation_deg: f64) -> f64 {
        if self.elevation_scaled {
            self.sigma_dopp / elevation_deg.to_radians().sin()
        } else {
            self.sigma_dopp
        }
    }
}

pub fn hz_to_range_rate(f_d: f64, wavelength: f64) -> f64 {
    -wavelength * f_d
}

pub fn range_rate_to_hz(range_rate: f64, wavelength: f64) -> f64 {
    -range_rate / wavelength
}

/// Range rate seen by a static user at `user_ecef`; `sat` must already be
/// propagated at `t − δc`.
pub fn predict_range_rate(sat: &SatelliteState, user_ecef: &Vector3<f64>, clock_drift_scaled: f64) -> Result<f64> {
    let los = user_ecef - sat.position;
    let d = los.norm();
    if d < 1e-3 {
        return Err(Error::CoincidentPoints);
    }
    Ok(-sat.velocity.dot(&los) / d + clock_drift_scaled)
}

/// Satellite states at `t_i − θ.δc` for every epoch.
pub fn propagate_states(source: &OrbitSource, theta: &StateVector, epochs: &[Epoch]) -> Result<Vec<SatelliteState>> {
    epochs
        .iter()
        .map(|&t| propagate_with_offset(source, t, theta.time_offset))
        .collect()
}

/// Range rates for `states` already propagated with `theta`'s time offset.
pub fn predict_from_states(states: &[SatelliteState], theta: &StateVector) -> Result<DVector<f64>> {
    let values: Vec<f64> = states
        .iter()
        .map(|s| predict_range_rate(s, &theta.position_ecef, theta.clock_drift_scaled))
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(values))
}

/// The stacked model `h(θ) = [h(t_1; θ), …, h(t_M; θ)]`.
pub fn predict_series(
    source: &OrbitSource,
    user_ecef: &Vector3<f64>,
    theta: &StateVector,
    epochs: &[Epoch],
) -> Result<Vec<f64>> {
    let theta = StateVector {
        position_ecef: *user_ecef,
        ..*theta
    };
    let states = propagate_states(source, &theta, epochs)?;
    Ok(predict_from_states(&states, &theta)?.iter().copied().collect())
}

/// Noise-free geometry of a set of epochs as seen from the true state:
/// satellite states and elevations. Fails with [`Error::WindowNotVisible`]
/// if any epoch is below `mask_deg`.
pub fn observe(
    source: &OrbitSource,
    truth: &StateVector,
    epochs: &[Epoch],
    mask_deg: f64,
) -> Result<(Vec<SatelliteState>, Vec<f64>)> {
    let frame = EnuFrame::at_ecef(&truth.position_ecef)?;
    let states = propagate_states(source, truth, epochs)?;
    let elevations: Vec<f64> = states.iter().map(|s| frame.look_angles(&s.position).0).collect();
    if elevations.iter().any(|&e| !(e >= mask_deg) || e <= 0.0) {
        return Err(Error::WindowNotVisible);
    }
    Ok((states, elevations))
}

/// Simulated observations `z_i = h(t_i; θ_true) + ε_i`, `ε_i ~ N(0, σ_i²)`.
///
/// The noise sequence depends only on `noise.seed`.
pub fn generate_measurements(
    source: &OrbitSource,
    truth: &StateVector,
    epochs: &[Epoch],
    noise: &NoiseModel,
    mask_deg: f64,
    carrier_wavelength: f64,
) -> Result<MeasurementSet> {
    let (states, elevations) = observe(source, truth, epochs, mask_deg)?;
    measurements_from_geometry(truth, epochs, states, &elevations, noise, carrier_wavelength)
}

/// As [`generate_measurements`] with the geometry already computed, so that
/// repeated noise draws do not re-propagate the orbit.
pub fn measurements_from_geometry(
    truth: &StateVector,
    epochs: &[Epoch],
    states: Vec<SatelliteState>,
    elevations: &[f64],
    noise: &NoiseModel,
    carrier_wavelength: f64,
) -> Result<MeasurementSet> {
    if noise.sigma_dopp < 0.0 {
        return Err(Error::InvalidParameter("sigma_dopp must be non-negative".into()));
    }
    let clean = predict_from_states(&states, truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let measurements = epochs
        .iter()
        .zip(elevations)
        .zip(clean.iter())
        .map(|((&epoch, &elevation_deg), &h)| {
            let sigma = noise.sigma_at(elevation_deg);
            let eps: f64 = rng.sample(StandardNormal);
            DopplerMeasurement {
                epoch,
                range_rate: h + sigma * eps,
                elevation_deg,
                // keep a positive nominal deviation for weighting even when noiseless
                sigma: if sigma > 0.0 { sigma } else { f64::MIN_POSITIVE },
            }
        })
        .collect();
    Ok(MeasurementSet {
        measurements,
        satellite_states: states,
        carrier_wavelength,
    })
}

/// Diagonal of the weight matrix, `sin²(E_i)`.
pub fn weights(set: &MeasurementSet) -> Result<DVector<f64>> {
    elevation_weights(set.measurements.iter().map(|m| m.elevation_deg))
}

pub fn elevation_weights(elevations_deg: impl IntoIterator<Item = f64>) -> Result<DVector<f64>> {
    let w: Vec<f64> = elevations_deg
        .into_iter()
        .enumerate()
        .map(|(index, e)| {
            if e > 0.0 {
                Ok(e.to_radians().sin().powi(2))
            } else {
                Err(Error::ZeroElevation { index })
            }
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(w))
}

/// Full `M×M` elevation weight matrix.
pub fn weight_matrix(set: &MeasurementSet) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from_diagonal(&weights(set)?))
}
