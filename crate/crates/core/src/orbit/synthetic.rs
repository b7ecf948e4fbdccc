//! Two-body circular orbits placed relative to a ground user.

use nalgebra::Vector3;

use super::{inertial_to_ecef, OrbitSource};
use crate::constants::{EARTH_RADIUS_SPHERICAL, EARTH_ROTATION_RATE, MU_EARTH};
use crate::geometry::{geodetic_to_ecef, max_elevation, EnuFrame, GeodeticPosition};
use crate::time::{add_seconds, Epoch};
use crate::{Error, Result};

/// Half-width of the window searched when tuning a synthetic pass, s.
const PASS_HALF_WINDOW_S: f64 = 900.0;

/// Circular orbit whose closest approach to `anchor` happens near
/// `reference_epoch`.
///
/// The inertial frame coincides with ECEF at the reference epoch. At that
/// instant the sub-satellite point lies on the anchor's geocentric radial,
/// shifted sideways (to the right of the direction of motion for positive
/// values) by `ground_track_offset_m` of arc on the spherical Earth. The
/// direction of motion at the reference epoch has azimuth
/// `inclination_to_user_deg` in the anchor's local horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularOrbit {
    pub altitude_m: f64,
    pub inclination_to_user_deg: f64,
    pub ground_track_offset_m: f64,
    pub reference_epoch: Epoch,
    pub anchor: GeodeticPosition,
    radial0: Vector3<f64>,
    along0: Vector3<f64>,
    mean_motion: f64,
}

impl CircularOrbit {
    pub fn new(
        anchor: GeodeticPosition,
        altitude_m: f64,
        inclination_to_user_deg: f64,
        ground_track_offset_m: f64,
        reference_epoch: Epoch,
    ) -> Result<Self> {
        if !(300e3..=2000e3).contains(&altitude_m) {
            return Err(Error::InvalidParameter(format!(
                "synthetic altitude {altitude_m} m outside [300e3, 2000e3]"
            )));
        }
        let user = geodetic_to_ecef(&anchor);
        let enu = EnuFrame::at(&anchor);
        let radial = user.normalize();
        let heading = inclination_to_user_deg.to_radians();
        let dir = enu.north * heading.cos() + enu.east * heading.sin();
        let along0 = (dir - radial * radial.dot(&dir)).normalize();
        let right = along0.cross(&radial);
        let phi = ground_track_offset_m / EARTH_RADIUS_SPHERICAL;
        let radial0 = radial * phi.cos() + right * phi.sin();
        let radius = EARTH_RADIUS_SPHERICAL + altitude_m;
        Ok(Self {
            altitude_m,
            inclination_to_user_deg,
            ground_track_offset_m,
            reference_epoch,
            anchor,
            radial0,
            along0,
            mean_motion: (MU_EARTH / radius.powi(3)).sqrt(),
        })
    }

    pub fn radius(&self) -> f64 {
        EARTH_RADIUS_SPHERICAL + self.altitude_m
    }

    /// Orbital period, s.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.mean_motion
    }

    pub(crate) fn inertial(&self, dt: f64) -> (Vector3<f64>, Vector3<f64>) {
        let (s, c) = (self.mean_motion * dt).sin_cos();
        let r = self.radius();
        let pos = (self.radial0 * c + self.along0 * s) * r;
        let vel = (self.along0 * c - self.radial0 * s) * (r * self.mean_motion);
        (pos, vel)
    }

    pub(crate) fn ecef(&self, dt: f64) -> (Vector3<f64>, Vector3<f64>) {
        let (r, v) = self.inertial(dt);
        inertial_to_ecef(EARTH_ROTATION_RATE * dt, &r, &v)
    }
}

/// Builds a synthetic pass over `user` whose maximum elevation is
/// `max_elevation_target_deg` (within 0.5°), by bisecting on the ground-track
/// offset. A 90° target gives the zero-offset overhead pass.
pub fn synthesize_pass(
    user: &GeodeticPosition,
    altitude_m: f64,
    heading_deg: f64,
    max_elevation_target_deg: f64,
    reference_epoch: Epoch,
    mask_deg: f64,
) -> Result<OrbitSource> {
    let target = max_elevation_target_deg;
    if !(target > 0.0 && target <= 90.0) {
        return Err(Error::InvalidParameter(format!(
            "maximum elevation target {target}° outside (0, 90]"
        )));
    }
    if target < mask_deg {
        return Err(Error::TargetUnreachable {
            target_deg: target,
            mask_deg,
        });
    }
    let build = |offset: f64| -> Result<OrbitSource> {
        Ok(OrbitSource::SyntheticCircular(CircularOrbit::new(
            *user,
            altitude_m,
            heading_deg,
            offset,
            reference_epoch,
        )?))
    };
    let window = (
        add_seconds(reference_epoch, -PASS_HALF_WINDOW_S),
        add_seconds(reference_epoch, PASS_HALF_WINDOW_S),
    );
    let peak = |offset: f64| -> Result<f64> {
        match max_elevation(&build(offset)?, user, window, -90.0) {
            Ok(e) => Ok(e),
            Err(Error::NoPassInWindow) => Ok(-90.0),
            Err(e) => Err(e),
        }
    };

    let overhead = peak(0.0)?;
    if (overhead - target).abs() <= 0.25 || target >= overhead {
        return build(0.0);
    }

    // spherical-Earth first guess for the offset, then bracket and bisect
    let r_user = geodetic_to_ecef(user).norm();
    let r_sat = EARTH_RADIUS_SPHERICAL + altitude_m;
    let e = target.to_radians();
    let psi = (r_user * e.cos() / r_sat).acos() - e;
    let mut lo = 0.0;
    let mut hi = (psi * EARTH_RADIUS_SPHERICAL * 1.5).max(10e3);
    while peak(hi)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 5e6 {
            return Err(Error::TargetUnreachable {
                target_deg: target,
                mask_deg,
            });
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let e_mid = peak(mid)?;
        if (e_mid - target).abs() < 1e-3 {
            return build(mid);
        }
        if e_mid > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}
