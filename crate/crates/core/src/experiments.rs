//! Geometric sensitivity sweeps.
//!
//! Every sweep point is the DDOP-theoretical 1σ along-track and cross-track
//! error of an epoch set seen from the true user position. Points whose
//! geometry cannot be evaluated are kept as sentinel records with a status.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::ddop::AxisConvention;
use crate::doppler::{observe, NoiseModel};
use crate::estimator::{SolverConfig, StateVector};
use crate::geometry::{geodetic_to_ecef, EnuFrame, GeodeticPosition};
use crate::montecarlo::fmt_f64;
use crate::orbit::{propagate, synthesize_pass, OrbitSource};
use crate::scenario::{analyze_epochs, GeometryAnalysis, PassGeometry, Scenario, PASS_SEARCH_MARGIN_S};
use crate::time::{add_seconds, Epoch};
use crate::{Error, Result};

/// Errors above this value are clamped and flagged, m.
pub const ERROR_CLAMP_M: f64 = 1e9;

/// Observations per window in the fixed-count sweeps.
pub const WINDOW_OBSERVATIONS: usize = 4;

pub const DEFAULT_COUNTS: [usize; 7] = [4, 10, 20, 50, 100, 200, 350];

pub fn default_intervals() -> Vec<f64> {
    (1..=8).map(|k| 10.0 * k as f64).collect()
}

pub fn default_offsets() -> Vec<f64> {
    (-15..=15).map(|k| 10.0 * k as f64).collect()
}

pub fn default_max_elevations() -> Vec<f64> {
    (2..=18).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStatus {
    Ok,
    /// An error exceeded [`ERROR_CLAMP_M`] and was clamped.
    Clamped,
    /// The normal matrix is singular for this epoch set.
    Singular,
    /// Some observations fall outside the visible pass.
    PassExceeded,
    /// The user never sees the pass.
    NotVisible,
}

impl SweepStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, SweepStatus::Ok | SweepStatus::Clamped)
    }
}

impl fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepStatus::Ok => "ok",
            SweepStatus::Clamped => "clamped",
            SweepStatus::Singular => "singular",
            SweepStatus::PassExceeded => "pass_exceeded",
            SweepStatus::NotVisible => "not_visible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// Column name of the swept parameter, unit included (e.g. `interval_s`).
    pub parameter_name: &'static str,
    pub parameter_value: f64,
    /// Spacing between observations, s (offset sweep only).
    pub sampling_interval_s: Option<f64>,
    /// 1σ along-track error, m.
    pub along_error_m: f64,
    /// 1σ cross-track error, m.
    pub cross_error_m: f64,
    /// 1σ semi-axes of the horizontal error ellipse, m.
    pub minor_error_m: f64,
    pub major_error_m: f64,
    pub hddop: f64,
    /// Position scaling factor of the analysis, 1/s.
    pub gamma: f64,
    pub status: SweepStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRecord {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Signed distance from the ground track at closest approach, m
    /// (positive towards the orbit normal).
    pub track_distance_m: f64,
    pub along_error_m: f64,
    pub cross_error_m: f64,
    pub minor_error_m: f64,
    pub major_error_m: f64,
    pub hddop: f64,
    pub gamma: f64,
    pub status: SweepStatus,
}

/// Inputs shared by every evaluation of a sweep.
#[derive(Debug, Clone, Copy)]
struct Evaluator<'a> {
    source: &'a OrbitSource,
    mask_deg: f64,
    solver: &'a SolverConfig,
    sigma: f64,
    convention: AxisConvention,
}

impl<'a> Evaluator<'a> {
    fn from_scenario(s: &'a Scenario) -> Self {
        Self {
            source: &s.source,
            mask_deg: s.mask_deg,
            solver: &s.solver,
            sigma: s.noise.sigma_dopp,
            convention: s.axis_convention,
        }
    }

    fn analyze(&self, truth: &StateVector, pass: &PassGeometry, epochs: &[Epoch]) -> Result<GeometryAnalysis> {
        analyze_epochs(
            self.source,
            truth,
            pass,
            epochs,
            self.mask_deg,
            self.solver,
            self.sigma,
            self.convention,
        )
    }
}

struct Outcome {
    along: f64,
    cross: f64,
    minor: f64,
    major: f64,
    hddop: f64,
    gamma: f64,
    status: SweepStatus,
}

impl Outcome {
    fn absent(status: SweepStatus) -> Self {
        Self {
            along: f64::NAN,
            cross: f64::NAN,
            minor: f64::NAN,
            major: f64::NAN,
            hddop: f64::NAN,
            gamma: f64::NAN,
            status,
        }
    }
}

/// Errors and status from an analysis outcome. `not_visible` is the status
/// used when some epoch is below the mask.
fn outcome(result: Result<GeometryAnalysis>, not_visible: SweepStatus) -> Result<Outcome> {
    match result {
        Ok(a) => {
            let mut along = a.theory.along_sigma;
            let mut cross = a.theory.cross_sigma;
            let ev = a.theory.covariance.symmetric_eigenvalues();
            let mut minor = ev.min().max(0.0).sqrt();
            let mut major = ev.max().max(0.0).sqrt();
            let mut status = SweepStatus::Ok;
            if !(major <= ERROR_CLAMP_M) || !(along <= ERROR_CLAMP_M) || !(cross <= ERROR_CLAMP_M) {
                along = along.min(ERROR_CLAMP_M);
                cross = cross.min(ERROR_CLAMP_M);
                minor = minor.min(ERROR_CLAMP_M);
                major = major.min(ERROR_CLAMP_M);
                status = SweepStatus::Clamped;
            }
            Ok(Outcome {
                along,
                cross,
                minor,
                major,
                hddop: a.ddop.hddop,
                gamma: a.scaling.gamma,
                status,
            })
        }
        Err(Error::WindowNotVisible) => Ok(Outcome::absent(not_visible)),
        Err(e) if e.is_numerical() => Ok(Outcome::absent(SweepStatus::Singular)),
        Err(e) => Err(e),
    }
}

fn record(
    name: &'static str,
    value: f64,
    interval: Option<f64>,
    result: Result<GeometryAnalysis>,
    not_visible: SweepStatus,
) -> Result<SweepRecord> {
    let o = outcome(result, not_visible)?;
    Ok(SweepRecord {
        parameter_name: name,
        parameter_value: value,
        sampling_interval_s: interval,
        along_error_m: o.along,
        cross_error_m: o.cross,
        minor_error_m: o.minor,
        major_error_m: o.major,
        hddop: o.hddop,
        gamma: o.gamma,
        status: o.status,
    })
}

/// `n` epochs centred on `center`, `interval` seconds apart.
pub fn centered_epochs(center: Epoch, interval: f64, n: usize) -> Vec<Epoch> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n)
        .map(|k| add_seconds(center, (k as f64 - mid) * interval))
        .collect()
}

/// `n` epochs spread uniformly from `start` to `end` inclusive.
pub fn uniform_epochs(start: Epoch, end: Epoch, n: usize) -> Vec<Epoch> {
    let span = crate::time::seconds_between(start, end);
    (0..n)
        .map(|k| add_seconds(start, span * k as f64 / (n - 1) as f64))
        .collect()
}

/// Observation count over the fixed scenario window.
pub fn sweep_observation_count(scenario: &Scenario, counts: &[usize]) -> Result<Vec<SweepRecord>> {
    if let Some(&n) = counts.iter().find(|&&n| n < WINDOW_OBSERVATIONS) {
        return Err(Error::InvalidParameter(format!(
            "observation count {n} below the {WINDOW_OBSERVATIONS} unknowns"
        )));
    }
    let pass = scenario.pass_geometry()?;
    let eval = Evaluator::from_scenario(scenario);
    let truth = scenario.truth();
    let (start, end) = (scenario.window_start, scenario.window_end());
    // a single pass is above the mask everywhere between its two ends
    observe(&scenario.source, &truth, &[start, end], scenario.mask_deg)?;
    counts
        .par_iter()
        .map(|&n| {
            let epochs = uniform_epochs(start, end, n);
            record(
                "observations",
                n as f64,
                None,
                eval.analyze(&truth, &pass, &epochs),
                SweepStatus::NotVisible,
            )
        })
        .collect()
}

/// Four observations from the window start with varying spacing.
pub fn sweep_sampling_time(scenario: &Scenario, intervals_s: &[f64]) -> Result<Vec<SweepRecord>> {
    let pass = scenario.pass_geometry()?;
    let eval = Evaluator::from_scenario(scenario);
    let truth = scenario.truth();
    intervals_s
        .par_iter()
        .map(|&dt| {
            if !(dt >= 0.0) {
                return Err(Error::InvalidParameter(format!("sampling interval {dt} s")));
            }
            let epochs: Vec<Epoch> = (0..WINDOW_OBSERVATIONS)
                .map(|k| add_seconds(scenario.window_start, k as f64 * dt))
                .collect();
            record(
                "interval_s",
                dt,
                None,
                eval.analyze(&truth, &pass, &epochs),
                SweepStatus::PassExceeded,
            )
        })
        .collect()
}

/// Four observations whose centre is offset from closest approach, for every
/// (interval, offset) pair. Output is ordered by interval, then offset.
pub fn sweep_window_offset(scenario: &Scenario, intervals_s: &[f64], offsets_s: &[f64]) -> Result<Vec<SweepRecord>> {
    let pass = scenario.pass_geometry()?;
    let eval = Evaluator::from_scenario(scenario);
    let truth = scenario.truth();
    let pairs: Vec<(f64, f64)> = intervals_s
        .iter()
        .flat_map(|&i| offsets_s.iter().map(move |&o| (i, o)))
        .collect();
    pairs
        .par_iter()
        .map(|&(interval, offset)| {
            let center = add_seconds(pass.closest_approach, offset);
            let epochs = centered_epochs(center, interval, WINDOW_OBSERVATIONS);
            record(
                "offset_s",
                offset,
                Some(interval),
                eval.analyze(&truth, &pass, &epochs),
                SweepStatus::PassExceeded,
            )
        })
        .collect()
}

/// Settings of the synthetic passes used by the inclination sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclinationSweep {
    pub user: GeodeticPosition,
    /// m
    pub altitude_m: f64,
    /// Azimuth of the ground track at closest approach, degrees.
    pub heading_deg: f64,
    pub reference_epoch: Epoch,
    /// Spacing of the observations centred on closest approach, s.
    pub interval_s: f64,
    pub mask_deg: f64,
    pub noise: NoiseModel,
    pub solver: SolverConfig,
    pub axis_convention: AxisConvention,
}

impl InclinationSweep {
    /// Synthetic passes sharing the scenario's user, noise, solver and the
    /// ground-track heading of its pass at closest approach.
    pub fn from_scenario(scenario: &Scenario, altitude_m: f64, interval_s: f64) -> Result<Self> {
        let pass = scenario.pass_geometry()?;
        let t = pass.enu.to_enu(&pass.rtn.t_axis);
        if t.x.hypot(t.y) < 1e-9 {
            return Err(Error::DegenerateState);
        }
        Ok(Self {
            user: scenario.user,
            altitude_m,
            heading_deg: t.x.atan2(t.y).to_degrees().rem_euclid(360.0),
            reference_epoch: pass.closest_approach,
            interval_s,
            mask_deg: scenario.mask_deg,
            noise: scenario.noise,
            solver: scenario.solver,
            axis_convention: scenario.axis_convention,
        })
    }
}

/// One synthetic pass per target maximum elevation, observed with four
/// epochs centred on closest approach.
pub fn sweep_inclination(cfg: &InclinationSweep, max_elevations_deg: &[f64]) -> Result<Vec<SweepRecord>> {
    if let Some(&e) = max_elevations_deg.iter().find(|&&e| e < cfg.mask_deg) {
        return Err(Error::TargetUnreachable {
            target_deg: e,
            mask_deg: cfg.mask_deg,
        });
    }
    let truth = StateVector::new(geodetic_to_ecef(&cfg.user), 0.0, 0.0);
    let window = (
        add_seconds(cfg.reference_epoch, -PASS_SEARCH_MARGIN_S),
        add_seconds(cfg.reference_epoch, PASS_SEARCH_MARGIN_S),
    );
    max_elevations_deg
        .par_iter()
        .map(|&target| {
            let source = synthesize_pass(
                &cfg.user,
                cfg.altitude_m,
                cfg.heading_deg,
                target,
                cfg.reference_epoch,
                cfg.mask_deg,
            )?;
            let pass = PassGeometry::locate(&source, &cfg.user, window, cfg.mask_deg)?;
            let epochs = centered_epochs(pass.closest_approach, cfg.interval_s, WINDOW_OBSERVATIONS);
            let eval = Evaluator {
                source: &source,
                mask_deg: cfg.mask_deg,
                solver: &cfg.solver,
                sigma: cfg.noise.sigma_dopp,
                convention: cfg.axis_convention,
            };
            record(
                "max_elevation_deg",
                target,
                None,
                eval.analyze(&truth, &pass, &epochs),
                SweepStatus::PassExceeded,
            )
        })
        .collect()
}

/// The subset of `epochs` at which the satellite is above the mask from `user`.
pub fn visible_epochs(source: &OrbitSource, user: &GeodeticPosition, epochs: &[Epoch], mask_deg: f64) -> Result<Vec<Epoch>> {
    let frame = EnuFrame::at(user);
    let mut out = Vec::with_capacity(epochs.len());
    for &t in epochs {
        let sat = propagate(source, t)?;
        if frame.look_angles(&sat.position).0 >= mask_deg {
            out.push(t);
        }
    }
    Ok(out)
}

/// Latitude/longitude grid around the scenario user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    pub step_deg: f64,
}

impl GridSpec {
    pub fn around(user: &GeodeticPosition, half_width_deg: f64, step_deg: f64) -> Self {
        Self {
            lat_range: (user.latitude_deg - half_width_deg, user.latitude_deg + half_width_deg),
            lon_range: (user.longitude_deg - half_width_deg, user.longitude_deg + half_width_deg),
            step_deg,
        }
    }

    pub fn nodes(&self) -> Result<Vec<(f64, f64)>> {
        if !(self.step_deg > 0.0) || self.lat_range.1 < self.lat_range.0 || self.lon_range.1 < self.lon_range.0 {
            return Err(Error::InvalidParameter("grid ranges must be ordered and step positive".into()));
        }
        let count = |(lo, hi): (f64, f64)| ((hi - lo) / self.step_deg + 1e-9).floor() as usize + 1;
        let (nlat, nlon) = (count(self.lat_range), count(self.lon_range));
        Ok((0..nlat)
            .flat_map(|i| {
                (0..nlon).map(move |j| {
                    (
                        self.lat_range.0 + i as f64 * self.step_deg,
                        self.lon_range.0 + j as f64 * self.step_deg,
                    )
                })
            })
            .filter(|(lat, _)| (-90.0..=90.0).contains(lat))
            .collect())
    }
}

/// Theoretical errors for users spread over a latitude/longitude grid, all
/// observing the scenario's pass with the scenario's epochs. Epochs below the
/// mask at a node are dropped; nodes left with fewer than four are absent.
/// Output is row-major (latitude, then longitude).
pub fn sweep_user_grid(scenario: &Scenario, grid: &GridSpec) -> Result<Vec<GridRecord>> {
    let nodes = grid.nodes()?;
    let eval = Evaluator::from_scenario(scenario);
    let window = scenario.pass_search_window();
    let all_epochs = scenario.epochs();
    let records: Vec<GridRecord> = nodes
        .par_iter()
        .map(|&(lat, lon)| {
            let user = GeodeticPosition::new(lat, lon, scenario.user.height_m);
            let absent = |status| GridRecord {
                latitude_deg: lat,
                longitude_deg: lon,
                track_distance_m: f64::NAN,
                along_error_m: f64::NAN,
                cross_error_m: f64::NAN,
                minor_error_m: f64::NAN,
                major_error_m: f64::NAN,
                hddop: f64::NAN,
                gamma: f64::NAN,
                status,
            };
            let pass = match PassGeometry::locate(&scenario.source, &user, window, scenario.mask_deg) {
                Ok(p) => p,
                Err(Error::NoPassInWindow | Error::MultipleMinima) => return Ok(absent(SweepStatus::NotVisible)),
                Err(e) if e.is_numerical() => return Ok(absent(SweepStatus::Singular)),
                Err(e) => return Err(e),
            };
            let truth = StateVector::new(geodetic_to_ecef(&user), scenario.true_clock_drift_scaled, 0.0);
            let epochs = visible_epochs(&scenario.source, &user, &all_epochs, scenario.mask_deg)?;
            if epochs.len() < WINDOW_OBSERVATIONS {
                return Ok(absent(SweepStatus::NotVisible));
            }
            let o = outcome(eval.analyze(&truth, &pass, &epochs), SweepStatus::NotVisible)?;
            let u = truth.position_ecef.normalize();
            let track_distance_m = crate::constants::EARTH_RADIUS_SPHERICAL * u.dot(&pass.rtn.n_axis).asin();
            Ok(GridRecord {
                latitude_deg: lat,
                longitude_deg: lon,
                track_distance_m,
                along_error_m: o.along,
                cross_error_m: o.cross,
                minor_error_m: o.minor,
                major_error_m: o.major,
                hddop: o.hddop,
                gamma: o.gamma,
                status: o.status,
            })
        })
        .collect::<Result<_>>()?;
    if records.iter().all(|r| r.status == SweepStatus::NotVisible) {
        return Err(Error::EmptyGrid);
    }
    Ok(records)
}

/// Writes sweep records as CSV. The offset sweep carries an extra
/// `interval_s` column.
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let name = records.first().map(|r| r.parameter_name).unwrap_or("parameter");
    let with_interval = records.iter().any(|r| r.sampling_interval_s.is_some());
    let mut header = vec![];
    if with_interval {
        header.push("interval_s");
    }
    header.extend([
        name,
        "along_error_m",
        "cross_error_m",
        "minor_error_m",
        "major_error_m",
        "hddop",
        "error_level",
        "status",
    ]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![];
        if with_interval {
            row.push(r.sampling_interval_s.map(fmt_f64).unwrap_or_default());
        }
        row.extend([
            fmt_f64(r.parameter_value),
            fmt_f64(r.along_error_m),
            fmt_f64(r.cross_error_m),
            fmt_f64(r.minor_error_m),
            fmt_f64(r.major_error_m),
            fmt_f64(r.hddop),
            "1sigma".to_string(),
            r.status.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_csv<W: Write>(records: &[GridRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "latitude_deg",
        "longitude_deg",
        "track_distance_m",
        "along_error_m",
        "cross_error_m",
        "minor_error_m",
        "major_error_m",
        "hddop",
        "error_level",
        "status",
    ])?;
    for r in records {
        w.write_record([
            fmt_f64(r.latitude_deg),
            fmt_f64(r.longitude_deg),
            fmt_f64(r.track_distance_m),
            fmt_f64(r.along_error_m),
            fmt_f64(r.cross_error_m),
            fmt_f64(r.minor_error_m),
            fmt_f64(r.major_error_m),
            fmt_f64(r.hddop),
            "1sigma".to_string(),
            r.status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
