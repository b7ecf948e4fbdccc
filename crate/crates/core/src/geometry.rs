//! Coordinate frames and pass geometry.

use nalgebra::{Matrix3, Vector3};

use crate::constants::{WGS84_A, WGS84_E2};
use crate::orbit::{OrbitSource, SatelliteState};
use crate::time::{add_seconds, seconds_between, Epoch};
use crate::{Error, Result};

/// Geodetic coordinates on the WGS-84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPosition {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub height_m: f64,
}

impl GeodeticPosition {
    pub fn new(latitude_deg: f64, longitude_deg: f64, height_m: f64) -> Self {
        Self {
            latitude_deg,
            longitude_deg,
            height_m,
        }
    }

    /// Checks the ranges expected of a ground user.
    pub fn validate_user(&self) -> Result<()> {
        let ok = (-90.0..=90.0).contains(&self.latitude_deg)
            && (-180.0..=180.0).contains(&self.longitude_deg)
            && (-500.0..=10_000.0).contains(&self.height_m);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("user position {self:?} out of range")))
        }
    }
}

pub fn geodetic_to_ecef(g: &GeodeticPosition) -> Vector3<f64> {
    let (sin_lat, cos_lat) = g.latitude_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = g.longitude_deg.to_radians().sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    Vector3::new(
        (n + g.height_m) * cos_lat * cos_lon,
        (n + g.height_m) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + g.height_m) * sin_lat,
    )
}

/// Inverse of [`geodetic_to_ecef`] by fixed-point iteration on latitude.
pub fn ecef_to_geodetic(p: &Vector3<f64>) -> Result<GeodeticPosition> {
    if !(p.norm() > 6.3e6) {
        return Err(Error::NearSingularOrigin);
    }
    let rho = p.x.hypot(p.y);
    let lon = p.y.atan2(p.x);
    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    for _ in 0..50 {
        let s = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
        let next = (p.z + WGS84_E2 * n * s).atan2(rho);
        let done = (next - lat).abs() < 1e-12;
        lat = next;
        if done {
            break;
        }
    }
    let (s, c) = lat.sin_cos();
    let height = rho * c + p.z * s - WGS84_A * (1.0 - WGS84_E2 * s * s).sqrt();
    Ok(GeodeticPosition::new(lat.to_degrees(), lon.to_degrees(), height))
}

/// Local East-North-Up frame at a point on or near the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnuFrame {
    pub origin_ecef: Vector3<f64>,
    pub east: Vector3<f64>,
    pub north: Vector3<f64>,
    pub up: Vector3<f64>,
}

impl EnuFrame {
    pub fn at(g: &GeodeticPosition) -> Self {
        let (sl, cl) = g.latitude_deg.to_radians().sin_cos();
        let (so, co) = g.longitude_deg.to_radians().sin_cos();
        Self {
            origin_ecef: geodetic_to_ecef(g),
            east: Vector3::new(-so, co, 0.0),
            north: Vector3::new(-sl * co, -sl * so, cl),
            up: Vector3::new(cl * co, cl * so, sl),
        }
    }

    pub fn at_ecef(p: &Vector3<f64>) -> Result<Self> {
        Ok(Self::at(&ecef_to_geodetic(p)?))
    }

    /// Rows are east, north, up.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.east.transpose(),
            self.north.transpose(),
            self.up.transpose(),
        ])
    }

    /// ENU components of an ECEF direction (no origin shift).
    pub fn to_enu(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * v
    }

    /// Elevation and azimuth (degrees) of `target_ecef` seen from the origin.
    pub fn look_angles(&self, target_ecef: &Vector3<f64>) -> (f64, f64) {
        let los = self.to_enu(&(target_ecef - self.origin_ecef));
        let n = los.norm();
        let elevation = (los.z / n).clamp(-1.0, 1.0).asin().to_degrees();
        let horizontal = los.x.hypot(los.y);
        let azimuth = if horizontal <= 1e-12 * n {
            0.0
        } else {
            los.x.atan2(los.y).to_degrees().rem_euclid(360.0)
        };
        (elevation, azimuth)
    }
}

/// Elevation and azimuth in degrees; azimuth is clockwise from north and
/// reported as 0° at the zenith.
pub fn elevation_azimuth(user_ecef: &Vector3<f64>, sat_ecef: &Vector3<f64>) -> Result<(f64, f64)> {
    Ok(EnuFrame::at_ecef(user_ecef)?.look_angles(sat_ecef))
}

/// Radial / transverse (along-track) / normal (cross-track) triad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtnFrame {
    pub r_axis: Vector3<f64>,
    pub t_axis: Vector3<f64>,
    pub n_axis: Vector3<f64>,
}

pub fn rtn_frame(state: &SatelliteState) -> Result<RtnFrame> {
    let r = state.position;
    let v = state.velocity;
    let h = r.cross(&v);
    if r.norm() == 0.0 || v.norm() == 0.0 || h.norm() < 1e-3 * r.norm() * v.norm() {
        return Err(Error::DegenerateState);
    }
    let r_axis = r.normalize();
    let n_axis = h.normalize();
    let t_axis = n_axis.cross(&r_axis);
    Ok(RtnFrame {
        r_axis,
        t_axis,
        n_axis,
    })
}

/// A pass extremum located by [`closest_approach_detail`] or
/// [`max_elevation_detail`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassPoint {
    pub epoch: Epoch,
    pub range_m: f64,
    pub elevation_deg: f64,
}

const GOLDEN_TOL_S: f64 = 1e-3;

/// Epoch of minimum satellite-user range within `[t0, t1]`.
pub fn closest_approach(
    source: &OrbitSource,
    user: &GeodeticPosition,
    window: (Epoch, Epoch),
    mask_deg: f64,
) -> Result<Epoch> {
    closest_approach_detail(source, user, window, mask_deg).map(|p| p.epoch)
}

pub fn closest_approach_detail(
    source: &OrbitSource,
    user: &GeodeticPosition,
    window: (Epoch, Epoch),
    mask_deg: f64,
) -> Result<PassPoint> {
    let frame = EnuFrame::at(user);
    let range = |dt: f64| -> Result<f64> { Ok((source.position_at_offset(dt)? - frame.origin_ecef).norm()) };
    let dt = locate_minimum(source, window, &range)?;
    let point = pass_point(source, &frame, dt)?;
    if point.elevation_deg < mask_deg {
        return Err(Error::NoPassInWindow);
    }
    Ok(point)
}

/// Highest elevation (degrees) reached within `[t0, t1]`.
pub fn max_elevation(
    source: &OrbitSource,
    user: &GeodeticPosition,
    window: (Epoch, Epoch),
    mask_deg: f64,
) -> Result<f64> {
    max_elevation_detail(source, user, window, mask_deg).map(|p| p.elevation_deg)
}

pub fn max_elevation_detail(
    source: &OrbitSource,
    user: &GeodeticPosition,
    window: (Epoch, Epoch),
    mask_deg: f64,
) -> Result<PassPoint> {
    let frame = EnuFrame::at(user);
    let neg_elevation =
        |dt: f64| -> Result<f64> { Ok(-frame.look_angles(&source.position_at_offset(dt)?).0) };
    let dt = locate_minimum(source, window, &neg_elevation)?;
    let point = pass_point(source, &frame, dt)?;
    if point.elevation_deg < mask_deg {
        return Err(Error::NoPassInWindow);
    }
    Ok(point)
}

fn pass_point(source: &OrbitSource, frame: &EnuFrame, dt: f64) -> Result<PassPoint> {
    let pos = source.position_at_offset(dt)?;
    Ok(PassPoint {
        epoch: add_seconds(source.reference_epoch(), dt),
        range_m: (pos - frame.origin_ecef).norm(),
        elevation_deg: frame.look_angles(&pos).0,
    })
}

/// 1 s scan for the single interior minimum, then golden-section refinement.
/// Returns the minimiser as seconds from the source reference epoch.
fn locate_minimum(
    source: &OrbitSource,
    window: (Epoch, Epoch),
    f: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let start = seconds_between(source.reference_epoch(), window.0);
    let span = seconds_between(window.0, window.1);
    if !(span > 0.0) {
        return Err(Error::InvalidParameter("empty search window".into()));
    }
    let steps = span.ceil() as usize;
    let samples: Vec<(f64, f64)> = (0..=steps)
        .map(|k| {
            let dt = start + (k as f64).min(span);
            f(dt).map(|v| (dt, v))
        })
        .collect::<Result<_>>()?;

    let interior: Vec<usize> = (1..samples.len() - 1)
        .filter(|&k| samples[k].1 <= samples[k - 1].1 && samples[k].1 < samples[k + 1].1)
        .collect();
    let k = match interior.as_slice() {
        [] => {
            // monotone over the window: the minimum sits on an edge
            let (i, _) = samples
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .unwrap();
            return Ok(samples[i].0);
        }
        [k] => *k,
        _ => return Err(Error::MultipleMinima),
    };
    golden_section(f, samples[k - 1].0, samples[k + 1].0, GOLDEN_TOL_S)
}

fn golden_section(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Horizontal unit vectors (ENU-projected and renormalised) of the RTN T and
/// N axes, expressed in ECEF. Used for along/cross-track decomposition.
pub fn horizontal_track_axes(rtn: &RtnFrame, enu: &EnuFrame) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let project = |v: &Vector3<f64>| {
        let h = v - enu.up * enu.up.dot(v);
        let n = h.norm();
        if n < 1e-9 {
            Err(Error::DegenerateState)
        } else {
            Ok(h / n)
        }
    };
    let along = project(&rtn.t_axis)?;
    let cross_raw = project(&rtn.n_axis)?;
    // Re-orthogonalise within the horizontal plane: the projections of T and
    // N are not exactly perpendicular once R is tilted from the local up.
    let cross = {
        let c = cross_raw - along * along.dot(&cross_raw);
        let n = c.norm();
        if n < 1e-9 {
            return Err(Error::DegenerateState);
        }
        c / n
    };
    Ok((along, cross))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::WGS84_B;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equator_and_pole() {
        let p = geodetic_to_ecef(&GeodeticPosition::new(0.0, 0.0, 0.0));
        assert_relative_eq!(p, Vector3::new(6378137.0, 0.0, 0.0), epsilon = 1e-9);
        let q = geodetic_to_ecef(&GeodeticPosition::new(90.0, 33.0, 0.0));
        assert!(q.x.abs() < 1e-9 && q.y.abs() < 1e-9);
        assert_relative_eq!(q.z, WGS84_B, epsilon = 1e-9);

        let g = ecef_to_geodetic(&Vector3::new(6378137.0, 0.0, 0.0)).unwrap();
        assert!(g.latitude_deg.abs() < 1e-12 && g.height_m.abs() < 1e-6);
        let g = ecef_to_geodetic(&Vector3::new(0.0, 0.0, WGS84_B + 100.0)).unwrap();
        assert!((g.latitude_deg - 90.0).abs() < 1e-12 && (g.height_m - 100.0).abs() < 1e-6);
    }

    #[test]
    fn barcelona_round_trip() {
        let g = GeodeticPosition::new(41.3976, 2.1497, 60.0);
        let back = ecef_to_geodetic(&geodetic_to_ecef(&g)).unwrap();
        assert!((back.latitude_deg - g.latitude_deg).abs() < 1e-9);
        assert!((back.longitude_deg - g.longitude_deg).abs() < 1e-9);
        assert!((back.height_m - g.height_m).abs() < 1e-4);
    }

    #[test]
    fn near_origin_is_rejected() {
        assert!(matches!(
            ecef_to_geodetic(&Vector3::new(1e3, 0.0, 0.0)),
            Err(Error::NearSingularOrigin)
        ));
    }

    #[test]
    fn enu_is_orthonormal_and_up_is_normal() {
        let g = GeodeticPosition::new(41.3976, 2.1497, 60.0);
        let f = EnuFrame::at(&g);
        let r = f.rotation();
        assert!((r * r.transpose() - Matrix3::identity()).norm() < 1e-12);
        // the ellipsoid normal is the gradient of x²/a² + y²/a² + z²/b²
        let p = geodetic_to_ecef(&GeodeticPosition::new(41.3976, 2.1497, 0.0));
        let grad = Vector3::new(p.x / WGS84_A.powi(2), p.y / WGS84_A.powi(2), p.z / WGS84_B.powi(2));
        assert!((grad.normalize() - f.up).norm() < 1e-12);
    }

    #[test]
    fn zenith_and_horizon() {
        let g = GeodeticPosition::new(41.3976, 2.1497, 60.0);
        let f = EnuFrame::at(&g);
        let (el, az) = elevation_azimuth(&f.origin_ecef, &(f.origin_ecef + 7e5 * f.up)).unwrap();
        assert!((el - 90.0).abs() < 1e-9);
        assert_eq!(az, 0.0);
        let (el, az) = elevation_azimuth(&f.origin_ecef, &(f.origin_ecef + 1e6 * f.east)).unwrap();
        assert!(el.abs() < 1e-9);
        assert!((az - 90.0).abs() < 1e-9);
    }

    #[test]
    fn canonical_rtn() {
        let s = SatelliteState {
            epoch: crate::time::parse_iso("2025-01-01T00:00:00Z").unwrap(),
            position: Vector3::new(7e6, 0.0, 0.0),
            velocity: Vector3::new(0.0, 7.5e3, 0.0),
            acceleration: Vector3::zeros(),
        };
        let f = rtn_frame(&s).unwrap();
        assert_relative_eq!(f.r_axis, Vector3::x(), epsilon = 1e-15);
        assert_relative_eq!(f.t_axis, Vector3::y(), epsilon = 1e-15);
        assert_relative_eq!(f.n_axis, Vector3::z(), epsilon = 1e-15);

        let parallel = SatelliteState {
            velocity: Vector3::new(7.5e3, 1.0, 0.0),
            ..s
        };
        assert!(matches!(rtn_frame(&parallel), Err(Error::DegenerateState)));
    }

    proptest! {
        #[test]
        fn geodetic_round_trip(lat in -90.0..90.0f64, lon in -180.0..180.0f64, h in -500.0..10_000.0f64) {
            let g = GeodeticPosition::new(lat, lon, h);
            let back = ecef_to_geodetic(&geodetic_to_ecef(&g)).unwrap();
            prop_assert!((back.latitude_deg - lat).abs() < 1e-9);
            if lat.abs() < 89.999 {
                prop_assert!((back.longitude_deg - lon).abs() < 1e-9);
            }
            prop_assert!((back.height_m - h).abs() < 1e-4);
        }

        #[test]
        fn look_angles_scale_invariant(x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.05..1.0f64, k in 0.1..50.0f64) {
            let f = EnuFrame::at(&GeodeticPosition::new(41.3976, 2.1497, 60.0));
            let dir = f.east * x + f.north * y + f.up * z;
            let a = f.look_angles(&(f.origin_ecef + 1e5 * dir));
            let b = f.look_angles(&(f.origin_ecef + 1e5 * k * dir));
            prop_assert!((a.0 - b.0).abs() < 1e-9);
            prop_assert!((a.1 - b.1).abs() < 1e-7);
        }

        #[test]
        fn rtn_is_right_handed(px in -1.0..1.0f64, py in -1.0..1.0f64, pz in -1.0..1.0f64,
                               vx in -1.0..1.0f64, vy in -1.0..1.0f64, vz in -1.0..1.0f64) {
            let r = Vector3::new(px, py, pz);
            let v = Vector3::new(vx, vy, vz);
            prop_assume!(r.norm() > 0.1 && v.norm() > 0.1 && r.cross(&v).norm() > 0.01 * r.norm() * v.norm());
            let s = SatelliteState {
                epoch: crate::time::parse_iso("2025-01-01T00:00:00Z").unwrap(),
                position: r.normalize() * 7e6,
                velocity: v.normalize() * 7.5e3,
                acceleration: Vector3::zeros(),
            };
            let f = rtn_frame(&s).unwrap();
            let m = Matrix3::from_columns(&[f.r_axis, f.t_axis, f.n_axis]);
            prop_assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            prop_assert!((f.r_axis.cross(&f.t_axis) - f.n_axis).norm() < 1e-12);
            prop_assert!(f.t_axis.dot(&s.velocity) > 0.0);
        }
    }
}
