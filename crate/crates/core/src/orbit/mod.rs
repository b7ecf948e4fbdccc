//! Satellite ephemerides in the Earth-fixed frame.
//!
//! Two sources are supported: SGP4 propagation of a parsed TLE, and a
//! two-body circular orbit placed relative to a ground user (used by the
//! inclination sweep). Both return [`SatelliteState`] in ECEF with an
//! acceleration obtained by central differencing of the velocity.

mod synthetic;
mod tle;

use nalgebra::{Matrix3, Vector3};

pub use synthetic::{synthesize_pass, CircularOrbit};
pub use tle::{checksum, parse_tle, TleRecord};

use crate::constants::EARTH_ROTATION_RATE;
use crate::time::{add_seconds, seconds_between, Epoch};
use crate::{Error, Result};

/// Step of the central difference used for the acceleration, s.
pub const ACCELERATION_STEP: f64 = 0.5;

/// Longest propagation span accepted around a TLE epoch, days.
pub const MAX_TLE_AGE_DAYS: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub epoch: Epoch,
    /// ECEF position, m.
    pub position: Vector3<f64>,
    /// ECEF velocity, m/s.
    pub velocity: Vector3<f64>,
    /// ECEF acceleration, m/s².
    pub acceleration: Vector3<f64>,
}

/// Where satellite states come from.
#[derive(Debug, Clone)]
pub enum OrbitSource {
    TlePropagated(TleOrbit),
    SyntheticCircular(CircularOrbit),
}

/// A TLE with its initialised SGP4 constants.
#[derive(Debug, Clone)]
pub struct TleOrbit {
    pub record: TleRecord,
    constants: sgp4::Constants,
    gmst_at_epoch: f64,
}

impl TleOrbit {
    pub fn new(record: TleRecord) -> Result<Self> {
        if !(0.0..1.0).contains(&record.eccentricity) {
            return Err(Error::InvalidParameter(format!(
                "eccentricity {} outside [0, 1)",
                record.eccentricity
            )));
        }
        let deg = std::f64::consts::PI / 180.0;
        let epoch_years = sgp4::julian_years_since_j2000(&record.epoch.naive_utc());
        let orbit = sgp4::Orbit::from_kozai_elements(
            &sgp4::WGS84,
            record.inclination_deg * deg,
            record.raan_deg * deg,
            record.eccentricity,
            record.arg_perigee_deg * deg,
            record.mean_anomaly_deg * deg,
            // rev/day -> rad/min
            record.mean_motion * std::f64::consts::PI / 720.0,
        )
        .map_err(|e| Error::PropagationDiverged(e.to_string()))?;
        let constants = sgp4::Constants::new(
            sgp4::WGS84,
            sgp4::iau_epoch_to_sidereal_time,
            epoch_years,
            record.bstar,
            orbit,
        )
        .map_err(|e| Error::PropagationDiverged(e.to_string()))?;
        Ok(Self {
            gmst_at_epoch: crate::time::gmst(record.epoch),
            record,
            constants,
        })
    }

    /// TEME position (m) and velocity (m/s) `dt` seconds after the element epoch.
    fn teme(&self, dt: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let p = self
            .constants
            .propagate(sgp4::MinutesSinceEpoch(dt / 60.0))
            .map_err(|e| Error::PropagationDiverged(e.to_string()))?;
        Ok((
            Vector3::from(p.position) * 1e3,
            Vector3::from(p.velocity) * 1e3,
        ))
    }

    /// ECEF position and velocity; TEME rotated by GMST (no polar motion).
    fn ecef(&self, dt: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let (r, v) = self.teme(dt)?;
        let theta = self.gmst_at_epoch + EARTH_ROTATION_RATE * dt;
        Ok(inertial_to_ecef(theta, &r, &v))
    }
}

/// Rotates an inertial state into a frame rotated by `theta` about +z and
/// spinning at the Earth rotation rate.
pub(crate) fn inertial_to_ecef(
    theta: f64,
    r: &Vector3<f64>,
    v: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let rot = rotation_z(theta);
    let r_e = rot * r;
    let omega = Vector3::new(0.0, 0.0, EARTH_ROTATION_RATE);
    let v_e = rot * v - omega.cross(&r_e);
    (r_e, v_e)
}

/// Frame rotation `R3(θ)`: components of a fixed vector in a frame rotated
/// by `θ` about +z.
pub(crate) fn rotation_z(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

impl OrbitSource {
    pub fn from_tle(record: TleRecord) -> Result<Self> {
        Ok(OrbitSource::TlePropagated(TleOrbit::new(record)?))
    }

    /// Epoch that time offsets are measured from (TLE epoch, or the pass
    /// reference epoch of a synthetic orbit).
    pub fn reference_epoch(&self) -> Epoch {
        match self {
            OrbitSource::TlePropagated(o) => o.record.epoch,
            OrbitSource::SyntheticCircular(o) => o.reference_epoch,
        }
    }

    /// Mean orbit radius, m.
    pub fn semi_major_axis(&self) -> f64 {
        match self {
            OrbitSource::TlePropagated(o) => {
                let n = o.record.mean_motion * 2.0 * std::f64::consts::PI / 86_400.0;
                (crate::constants::MU_EARTH / (n * n)).cbrt()
            }
            OrbitSource::SyntheticCircular(o) => o.radius(),
        }
    }

    fn ecef_at(&self, dt: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        match self {
            OrbitSource::TlePropagated(o) => {
                let days = dt / 86_400.0;
                if days.abs() > MAX_TLE_AGE_DAYS {
                    return Err(Error::EpochOutOfRange { days });
                }
                o.ecef(dt)
            }
            OrbitSource::SyntheticCircular(o) => Ok(o.ecef(dt)),
        }
    }

    /// Inertial (TEME for TLEs) position and velocity at `t`.
    pub fn propagate_inertial(&self, t: Epoch) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let dt = seconds_between(self.reference_epoch(), t);
        match self {
            OrbitSource::TlePropagated(o) => o.teme(dt),
            OrbitSource::SyntheticCircular(o) => Ok(o.inertial(dt)),
        }
    }

    /// ECEF position `dt` seconds after the reference epoch, without the
    /// extra evaluations needed for the acceleration.
    pub fn position_at_offset(&self, dt: f64) -> Result<Vector3<f64>> {
        self.ecef_at(dt).map(|(r, _)| r)
    }

    /// State `dt` seconds after [`reference_epoch`](Self::reference_epoch).
    pub fn state_at_offset(&self, dt: f64) -> Result<SatelliteState> {
        let (position, velocity) = self.ecef_at(dt)?;
        let (_, v_plus) = self.ecef_at(dt + ACCELERATION_STEP)?;
        let (_, v_minus) = self.ecef_at(dt - ACCELERATION_STEP)?;
        let acceleration = (v_plus - v_minus) / (2.0 * ACCELERATION_STEP);
        Ok(SatelliteState {
            epoch: add_seconds(self.reference_epoch(), dt),
            position,
            velocity,
            acceleration,
        })
    }
}

/// Earth-fixed satellite state at `t`.
pub fn propagate(source: &OrbitSource, t: Epoch) -> Result<SatelliteState> {
    propagate_with_offset(source, t, 0.0)
}

/// Satellite state at `t − delta_c`.
///
/// The offset is applied in floating-point seconds relative to the source
/// epoch, so sub-nanosecond offsets are honoured.
pub fn propagate_with_offset(source: &OrbitSource, t: Epoch, delta_c: f64) -> Result<SatelliteState> {
    if !delta_c.is_finite() || delta_c.abs() >= 10.0 {
        return Err(Error::InvalidParameter(format!(
            "time offset {delta_c} s outside (-10, 10)"
        )));
    }
    let dt = seconds_between(source.reference_epoch(), t) - delta_c;
    source.state_at_offset(dt)
}
