//! Doppler dilution of precision.
//!
//! The Jacobian is made dimensionless with two scaling factors,
//!
//! ```text
//! γ = 1/(1 − r_e/a) · sqrt(μ/a³)          [1/s]
//! η = (r_e/a)/(1 − r_e/a) · μ/a²          [m/s²]
//! ```
//!
//! so that `H̃ = H·S` with `S = diag(1/γ, …, 1, 1/η)`. The scaled covariance
//! `C = (H̃ᵀWH̃)⁻¹` gives the DDOP figures and, multiplied back by the
//! measurement deviation, the dimensional 1σ errors.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Vector3};

use crate::constants::{CHI2_2DOF_95, EARTH_RADIUS_SPHERICAL, MU_EARTH, SPEED_OF_LIGHT};
use crate::estimator::SolverConfig;
use crate::geometry::{horizontal_track_axes, EnuFrame, RtnFrame};
use crate::{Error, Result};

/// Reciprocal condition of `√W·H̃` below which the geometry is declared singular.
const MIN_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFactors {
    /// 1/s
    pub gamma: f64,
    /// m/s²
    pub eta: f64,
    pub a_orb: f64,
    pub r_e: f64,
    pub mu: f64,
}

impl ScalingFactors {
    pub fn new(a_orb: f64) -> Result<Self> {
        let r_e = EARTH_RADIUS_SPHERICAL;
        let mu = MU_EARTH;
        if !(a_orb > r_e) || !a_orb.is_finite() {
            return Err(Error::OrbitBelowSurface { a_orb });
        }
        let ratio = r_e / a_orb;
        let gamma = (1.0 / (1.0 - ratio)) * (mu / a_orb.powi(3)).sqrt();
        let eta = (ratio / (1.0 - ratio)) * (mu / (a_orb * a_orb));
        Ok(Self {
            gamma,
            eta,
            a_orb,
            r_e,
            mu,
        })
    }

    /// Uses the mean of several orbit radii.
    pub fn from_radii(radii: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (sum, n) = radii.into_iter().fold((0.0, 0usize), |(s, n), r| (s + r, n + 1));
        if n == 0 {
            return Err(Error::InvalidParameter("no orbit radii".into()));
        }
        Self::new(sum / n as f64)
    }

    /// Diagonal of `S` for a Jacobian with `ncols` columns.
    pub fn column_scales(&self, ncols: usize) -> DVector<f64> {
        let mut s = DVector::from_element(ncols, 1.0 / self.gamma);
        s[ncols - 2] = 1.0;
        s[ncols - 1] = 1.0 / self.eta;
        s
    }
}

/// `H̃ = H·S`. The last two columns are taken as clock drift and time offset,
/// the rest as position.
pub fn scale_jacobian(j: &DMatrix<f64>, s: &ScalingFactors) -> DMatrix<f64> {
    let scales = s.column_scales(j.ncols());
    let mut out = j.clone();
    for (mut col, f) in out.column_iter_mut().zip(scales.iter()) {
        col *= *f;
    }
    out
}

/// `(H̃ᵀWH̃)⁻¹` from the SVD of `√W·H̃`.
pub fn ddop_covariance(j_scaled: &DMatrix<f64>, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let k = j_scaled.ncols();
    if j_scaled.nrows() < k {
        return Err(Error::SingularGeometry {
            direction: vec![f64::NAN; k],
        });
    }
    let mut a = j_scaled.clone();
    for (mut row, wi) in a.row_iter_mut().zip(w.iter()) {
        row *= wi.sqrt();
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let sv = &svd.singular_values;
    let (imin, smin) = sv.argmin();
    let smax = sv.max();
    if !(smin > MIN_RCOND * smax) {
        return Err(Error::SingularGeometry {
            direction: v_t.row(imin).iter().copied().collect(),
        });
    }
    // C = V Σ⁻² Vᵀ
    let mut scaled = v_t.transpose();
    for (mut col, s) in scaled.column_iter_mut().zip(sv.iter()) {
        col /= s * s;
    }
    let c = &scaled * v_t;
    Ok((&c + c.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdopResult {
    pub covariance_scaled: DMatrix<f64>,
    pub pddop: f64,
    pub hddop: f64,
    pub cddop: f64,
    pub tddop: f64,
    /// m
    pub position_sigma: f64,
    /// s
    pub time_offset_sigma: f64,
    /// s/s
    pub drift_sigma: f64,
}

/// DDOP figures of a scaled covariance. With four unknowns the position block
/// is the two horizontal coordinates and `pddop == hddop`.
pub fn ddop_metrics(c: &DMatrix<f64>, s: &ScalingFactors, sigma_meas: f64) -> DdopResult {
    let k = c.ncols();
    let p = k - 2;
    let hddop = (c[(0, 0)] + c[(1, 1)]).sqrt();
    let pddop = (0..p).map(|i| c[(i, i)]).sum::<f64>().sqrt();
    let cddop = c[(p, p)].sqrt();
    let tddop = c[(p + 1, p + 1)].sqrt();
    DdopResult {
        covariance_scaled: c.clone(),
        pddop,
        hddop,
        cddop,
        tddop,
        position_sigma: pddop * sigma_meas / s.gamma,
        time_offset_sigma: tddop * sigma_meas / s.eta,
        drift_sigma: cddop * sigma_meas / SPEED_OF_LIGHT,
    }
}

/// Measurement deviation in m/s from a Doppler deviation in Hz.
pub fn sigma_from_hz(sigma_hz: f64, wavelength: f64) -> f64 {
    sigma_hz * wavelength
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DopRating {
    Ideal,
    Excellent,
    Good,
    Fair,
    Poor,
}

impl fmt::Display for DopRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DopRating::Ideal => "Ideal",
            DopRating::Excellent => "Excellent",
            DopRating::Good => "Good",
            DopRating::Fair => "Fair",
            DopRating::Poor => "Poor",
        })
    }
}

pub fn classify_dop(value: f64) -> DopRating {
    if value <= 1.0 {
        DopRating::Ideal
    } else if value <= 2.0 {
        DopRating::Excellent
    } else if value <= 5.0 {
        DopRating::Good
    } else if value <= 10.0 {
        DopRating::Fair
    } else {
        DopRating::Poor
    }
}

/// Which pair of axes along/cross-track errors are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxisConvention {
    /// Local-horizontal projections of T and N.
    #[default]
    HorizontalProjection,
    /// T and N themselves.
    Rtn3d,
}

/// Along-track and cross-track unit vectors (ECEF) for a convention.
pub fn track_axes(rtn: &RtnFrame, enu: &EnuFrame, convention: AxisConvention) -> Result<(Vector3<f64>, Vector3<f64>)> {
    match convention {
        AxisConvention::HorizontalProjection => horizontal_track_axes(rtn, enu),
        AxisConvention::Rtn3d => Ok((rtn.t_axis, rtn.n_axis)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceEllipse {
    /// m
    pub semi_major: f64,
    /// m
    pub semi_minor: f64,
    /// Angle of the major axis from the along-track axis towards cross-track, rad.
    pub orientation: f64,
    pub confidence: f64,
}

/// Chi-square quantile with two degrees of freedom.
pub fn chi2_2dof(confidence: f64) -> f64 {
    if (confidence - 0.95).abs() < 1e-12 {
        CHI2_2DOF_95
    } else {
        -2.0 * (1.0 - confidence).ln()
    }
}

/// Ellipse of a 2×2 covariance expressed in (along, cross) coordinates.
pub fn ellipse_from_covariance(cov: &Matrix2<f64>, confidence: f64) -> Result<ConfidenceEllipse> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence {confidence} outside (0, 1)")));
    }
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateCovariance);
    }
    let (a, b, c) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
    // closed-form symmetric 2×2 eigen-decomposition
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = half_diff.hypot(b);
    let l1 = mean + radius;
    // det/l1 avoids cancellation when the eigenvalues differ by many orders
    let l2 = if l1 > 0.0 { (a * c - b * b) / l1 } else { 0.0 };
    if !(l2 > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    let k = chi2_2dof(confidence);
    let orientation = if radius <= 1e-14 * mean.abs() {
        0.0
    } else {
        0.5 * b.atan2(half_diff)
    };
    Ok(ConfidenceEllipse {
        semi_major: (k * l1).sqrt(),
        semi_minor: (k * l2).sqrt(),
        orientation,
        confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalEllipse {
    pub ellipse: ConfidenceEllipse,
    /// Along/cross covariance, m².
    pub covariance: Matrix2<f64>,
    /// 1σ along-track error, m.
    pub along_sigma: f64,
    /// 1σ cross-track error, m.
    pub cross_sigma: f64,
}

/// Maps the scaled covariance onto along/cross-track axes in metres.
///
/// `enu` must be the frame the solver's horizontal coordinates were defined in
/// (the truth / initial-guess position).
#[allow(clippy::too_many_arguments)]
pub fn theoretical_ellipse(
    c: &DMatrix<f64>,
    rtn: &RtnFrame,
    enu: &EnuFrame,
    sigma_meas: f64,
    s: &ScalingFactors,
    confidence: f64,
    solver: &SolverConfig,
    convention: AxisConvention,
) -> Result<TheoreticalEllipse> {
    let basis = solver.position_basis(enu);
    let p = basis.ncols();
    if c.ncols() != p + 2 {
        return Err(Error::InvalidParameter(format!(
            "covariance has {} columns, solver estimates {}",
            c.ncols(),
            p + 2
        )));
    }
    let (along, cross) = track_axes(rtn, enu, convention)?;
    let axes = Matrix2x3::from_rows(&[along.transpose(), cross.transpose()]);
    let basis3 = nalgebra::Matrix3xX::from_iterator(p, basis.iter().copied());
    let m = axes * basis3;
    let block = c.view((0, 0), (p, p));
    let scale = (sigma_meas / s.gamma).powi(2);
    let mut cov = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for a in 0..p {
                for b in 0..p {
                    acc += m[(i, a)] * block[(a, b)] * m[(j, b)];
                }
            }
            cov[(i, j)] = acc * scale;
        }
    }
    cov = (cov + cov.transpose()) * 0.5;
    let ellipse = ellipse_from_covariance(&cov, confidence)?;
    Ok(TheoreticalEllipse {
        ellipse,
        covariance: cov,
        along_sigma: cov[(0, 0)].max(0.0).sqrt(),
        cross_sigma: cov[(1, 1)].max(0.0).sqrt(),
    })
}
