//! The `leodop` command line: scenario loading and subcommand dispatch.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 numerical failure (singular geometry, non-convergence). Every failure
//! prints a single line `CODE: message` on standard error.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use leodop_core::ddop::classify_dop;
use leodop_core::doppler::{generate_measurements, predict_series, range_rate_to_hz};
use leodop_core::estimator::{solve, StateVector};
use leodop_core::experiments::{
    sweep_inclination, sweep_observation_count, sweep_sampling_time, sweep_user_grid, sweep_window_offset,
    write_grid_csv, write_sweep_csv, GridSpec, InclinationSweep,
};
use leodop_core::geometry::{ecef_to_geodetic, EnuFrame};
use leodop_core::montecarlo::{decompose_error_with, fmt_f64, run_trials, McConfig};
use leodop_core::orbit::propagate;
use leodop_core::scenario::Scenario;
use leodop_core::time::{epoch_grid, format_iso};

use crate::config::{load_scenario, ConfigError, ScenarioFile};

/// Directory searched for scenario names and the default scenario.
pub const SCENARIO_DIR_ENV: &str = "LEODOP_SCENARIO_DIR";
pub const DEFAULT_SCENARIO: &str = "barcelona.toml";

#[derive(Debug, Parser)]
#[command(name = "leodop", version, about = "Single-satellite LEO Doppler positioning studies")]
pub struct Cli {
    /// Scenario file, or a scenario name looked up in $LEODOP_SCENARIO_DIR.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Overrides the scenario's base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the zenith noise deviation, m/s.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Do not echo the defaults applied to the scenario.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Satellite state table over the observation window (CSV).
    Propagate {
        /// Row spacing, s (default: the scenario sample period).
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noise-free Doppler series over the observation window (CSV).
    Predict {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves one simulated measurement set.
    Solve,
    /// DDOP metrics and the theoretical 95% error ellipse.
    Ddop,
    /// Repeated noisy solves: summary on stdout, per-trial CSV to --out.
    Montecarlo {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "montecarlo_trials.csv")]
        out: PathBuf,
    },
    /// Theoretical error sweeps (CSV).
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// Observation count over the fixed window.
    Count {
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Four observations from the window start at increasing spacing.
    Sampling {
        #[arg(long, value_delimiter = ',')]
        intervals: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Four observations centred at an offset from closest approach.
    Offset {
        #[arg(long, value_delimiter = ',')]
        intervals: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        offsets: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic passes of increasing maximum elevation.
    Inclination {
        #[arg(long, value_delimiter = ',')]
        max_elevations: Option<Vec<f64>>,
        /// Synthetic orbit altitude, m.
        #[arg(long)]
        altitude: Option<f64>,
        /// Observation spacing, s.
        #[arg(long)]
        interval: Option<f64>,
        /// Ground-track azimuth, degrees (default: the scenario pass).
        #[arg(long)]
        heading: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Users on a latitude/longitude grid around the scenario user.
    Grid {
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] leodop_core::Error),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    /// Reason code printed before the message.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "USAGE",
            CliError::Config(e) => e.code(),
            CliError::Core(e) => e.code(),
            CliError::Io(_) => "IO",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                    let _ = writeln!(err, "USAGE: {first}");
                    1
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "{}: {message}", e.code());
            e.exit_code()
        }
    }
}

/// Path of the scenario named on the command line, or the default one.
pub fn resolve_scenario(arg: Option<&str>) -> PathBuf {
    let dir = std::env::var_os(SCENARIO_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios"));
    let Some(arg) = arg else {
        return dir.join(DEFAULT_SCENARIO);
    };
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return direct;
    }
    [dir.join(arg), dir.join(format!("{arg}.toml"))]
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or(direct)
}

fn load(cli: &Cli, err: &mut dyn Write) -> Result<ScenarioFile, CliError> {
    let path = resolve_scenario(cli.scenario.as_deref());
    let mut file = load_scenario(&path)?;
    if let Some(seed) = cli.seed {
        file.scenario.noise.seed = seed;
    }
    if let Some(sigma) = cli.sigma {
        if !(sigma >= 0.0) {
            return Err(CliError::Usage("--sigma must be non-negative".into()));
        }
        file.scenario.noise.sigma_dopp = sigma;
    }
    file.scenario.validate()?;
    if !cli.quiet {
        writeln!(err, "scenario: {}", path.display())?;
        for d in &file.defaults_applied {
            writeln!(err, "default: {d}")?;
        }
    }
    Ok(file)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let file = load(cli, err)?;
    let sc = &file.scenario;
    match &cli.command {
        Command::Propagate { step, out: path } => {
            let step = step.unwrap_or(sc.sample_period_s);
            if !(step > 0.0) {
                return Err(CliError::Usage("--step must be positive".into()));
            }
            with_output(path.as_deref(), out, |w| write_states(sc, step, w))
        }
        Command::Predict { out: path } => with_output(path.as_deref(), out, |w| write_prediction(sc, w)),
        Command::Solve => solve_report(&file, out),
        Command::Ddop => ddop_report(sc, out),
        Command::Montecarlo { trials, out: path } => {
            let n = trials.unwrap_or(file.mc_trials);
            let mc = McConfig::from_scenario(sc, n);
            let result = run_trials(sc, &mc)?;
            let mut w = BufWriter::new(File::create(path)?);
            result.write_trials_csv(&mut w)?;
            w.flush()?;
            montecarlo_report(&result, out)?;
            if !cli.quiet {
                writeln!(err, "wrote {} trials to {}", result.trials.len(), path.display())?;
            }
            Ok(())
        }
        Command::Sweep { kind } => sweep(&file, kind, out),
    }
}

/// Runs `body` on a buffered file at `path`, or on `stdout` when absent.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => body(stdout),
    }
}

fn write_states(sc: &Scenario, step: f64, w: &mut dyn Write) -> Result<(), CliError> {
    let n = (sc.duration_s / step + 1e-9).floor() as usize;
    let frame = EnuFrame::at(&sc.user);
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "epoch_utc", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps", "elevation_deg", "azimuth_deg", "range_m",
    ])
    .map_err(leodop_core::Error::from)?;
    for t in epoch_grid(sc.window_start, step, n) {
        let s = propagate(&sc.source, t)?;
        let (el, az) = frame.look_angles(&s.position);
        let range = (s.position - frame.origin_ecef).norm();
        let mut row = vec![format_iso(t)];
        row.extend(s.position.iter().chain(s.velocity.iter()).map(|v| fmt_f64(*v)));
        row.extend([el, az, range].map(fmt_f64));
        csv.write_record(&row).map_err(leodop_core::Error::from)?;
    }
    csv.flush()?;
    Ok(())
}

fn write_prediction(sc: &Scenario, w: &mut dyn Write) -> Result<(), CliError> {
    let truth = sc.truth();
    let epochs = sc.epochs();
    let rates = predict_series(&sc.source, &truth.position_ecef, &truth, &epochs)?;
    let frame = EnuFrame::at(&sc.user);
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["epoch_utc", "range_rate_mps", "doppler_hz", "elevation_deg"])
        .map_err(leodop_core::Error::from)?;
    for (t, rr) in epochs.iter().zip(rates) {
        let s = leodop_core::orbit::propagate_with_offset(&sc.source, *t, truth.time_offset)?;
        let (el, _) = frame.look_angles(&s.position);
        csv.write_record([
            format_iso(*t),
            fmt_f64(rr),
            fmt_f64(range_rate_to_hz(rr, sc.carrier_wavelength)),
            fmt_f64(el),
        ])
        .map_err(leodop_core::Error::from)?;
    }
    csv.flush()?;
    Ok(())
}

fn line(out: &mut dyn Write, key: &str, value: impl std::fmt::Display) -> io::Result<()> {
    writeln!(out, "{key:<28}{value}")
}

fn solve_report(file: &ScenarioFile, out: &mut dyn Write) -> Result<(), CliError> {
    let sc = &file.scenario;
    let truth = sc.truth();
    let set = generate_measurements(&sc.source, &truth, &sc.epochs(), &sc.noise, sc.mask_deg, sc.carrier_wavelength)?;
    let enu = EnuFrame::at_ecef(&truth.position_ecef)?;
    let g = &file.initial;
    let initial = StateVector::new(
        truth.position_ecef + enu.east * g.east_m + enu.north * g.north_m,
        g.clock_drift_mps,
        g.time_offset_s,
    );
    let r = solve(&set, &sc.source, &initial, &sc.solver)?;
    let pass = sc.pass_geometry()?;
    let (along, cross) = decompose_error_with(&r.estimate, &truth, &pass.rtn, &enu, sc.axis_convention)?;
    let e = r.estimate.position_ecef - truth.position_ecef;
    let geo = ecef_to_geodetic(&r.estimate.position_ecef)?;

    line(out, "observations", set.len())?;
    line(out, "converged", r.converged)?;
    line(out, "iterations", r.iterations)?;
    line(out, "latitude_deg", format!("{:.8}", geo.latitude_deg))?;
    line(out, "longitude_deg", format!("{:.8}", geo.longitude_deg))?;
    line(out, "height_m", format!("{:.3}", geo.height_m))?;
    line(out, "error_east_m", format!("{:.6}", e.dot(&enu.east)))?;
    line(out, "error_north_m", format!("{:.6}", e.dot(&enu.north)))?;
    line(out, "error_up_m", format!("{:.6}", e.dot(&enu.up)))?;
    line(out, "error_along_m", format!("{along:.6}"))?;
    line(out, "error_cross_m", format!("{cross:.6}"))?;
    line(out, "error_horizontal_m", format!("{:.6}", along.hypot(cross)))?;
    line(out, "time_offset_s", format!("{:.9}", r.estimate.time_offset))?;
    line(out, "clock_drift_scaled_mps", format!("{:.6}", r.estimate.clock_drift_scaled))?;
    line(out, "weighted_residual_mps", format!("{:.6e}", r.weighted_residual_norm))?;
    line(out, "normal_condition", format!("{:.3e}", r.normal_matrix_condition))?;
    if !r.converged {
        return Err(leodop_core::Error::DidNotConverge { iterations: r.iterations }.into());
    }
    Ok(())
}

fn ddop_report(sc: &Scenario, out: &mut dyn Write) -> Result<(), CliError> {
    let pass = sc.pass_geometry()?;
    let epochs = sc.epochs();
    let a = sc.analyze(&pass, &epochs)?;
    let d = &a.ddop;
    let peak = a.elevations_deg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    line(out, "observations", epochs.len())?;
    line(out, "closest_approach_utc", format_iso(pass.closest_approach))?;
    line(out, "max_window_elevation_deg", format!("{peak:.3}"))?;
    line(out, "a_orb_m", format!("{:.1}", a.scaling.a_orb))?;
    line(out, "gamma_per_s", format!("{:.9e}", a.scaling.gamma))?;
    line(out, "eta_mps2", format!("{:.9e}", a.scaling.eta))?;
    for (name, v) in [("PDDOP", d.pddop), ("HDDOP", d.hddop), ("CDDOP", d.cddop), ("TDDOP", d.tddop)] {
        line(out, name, format!("{v:<14.6} {}", classify_dop(v)))?;
    }
    line(out, "sigma_dopp_mps", sc.noise.sigma_dopp)?;
    line(out, "position_sigma_m", format!("{:.3}", d.position_sigma))?;
    line(out, "time_offset_sigma_s", format!("{:.6e}", d.time_offset_sigma))?;
    line(out, "clock_drift_sigma", format!("{:.6e}", d.drift_sigma))?;
    line(out, "along_sigma_m", format!("{:.3}", a.theory.along_sigma))?;
    line(out, "cross_sigma_m", format!("{:.3}", a.theory.cross_sigma))?;
    let e = a.theory.ellipse;
    line(out, "ellipse95_semi_major_m", format!("{:.3}", e.semi_major))?;
    line(out, "ellipse95_semi_minor_m", format!("{:.3}", e.semi_minor))?;
    line(out, "ellipse95_orientation_deg", format!("{:.3}", e.orientation.to_degrees()))?;
    Ok(())
}

fn montecarlo_report(r: &leodop_core::montecarlo::McResult, out: &mut dyn Write) -> Result<(), CliError> {
    line(out, "trials", r.n_trials)?;
    line(out, "converged", r.converged_count)?;
    let c = &r.empirical_cov;
    line(out, "empirical_along_sigma_m", format!("{:.3}", c[(0, 0)].sqrt()))?;
    line(out, "empirical_cross_sigma_m", format!("{:.3}", c[(1, 1)].sqrt()))?;
    if let Some(e) = &r.empirical_ellipse {
        line(out, "empirical95_semi_major_m", format!("{:.3}", e.semi_major))?;
        line(out, "empirical95_semi_minor_m", format!("{:.3}", e.semi_minor))?;
        line(out, "empirical95_orientation_deg", format!("{:.3}", e.orientation.to_degrees()))?;
    }
    if let Some(t) = &r.theoretical {
        line(out, "theory_along_sigma_m", format!("{:.3}", t.along_sigma))?;
        line(out, "theory_cross_sigma_m", format!("{:.3}", t.cross_sigma))?;
        line(out, "theory95_semi_major_m", format!("{:.3}", t.ellipse.semi_major))?;
        line(out, "theory95_semi_minor_m", format!("{:.3}", t.ellipse.semi_minor))?;
        line(out, "theory95_orientation_deg", format!("{:.3}", t.ellipse.orientation.to_degrees()))?;
        line(out, "containment_fraction", format!("{:.4}", r.containment_fraction))?;
    }
    Ok(())
}

fn sweep(file: &ScenarioFile, kind: &SweepKind, out: &mut dyn Write) -> Result<(), CliError> {
    let sc = &file.scenario;
    let s = &file.sweeps;
    match kind {
        SweepKind::Count { counts, out: path } => {
            let counts = counts.clone().unwrap_or_else(|| s.counts.clone());
            let recs = sweep_observation_count(sc, &counts)?;
            with_output(path.as_deref(), out, |w| Ok(write_sweep_csv(&recs, w)?))
        }
        SweepKind::Sampling { intervals, out: path } => {
            let intervals = intervals.clone().unwrap_or_else(|| s.intervals_s.clone());
            let recs = sweep_sampling_time(sc, &intervals)?;
            with_output(path.as_deref(), out, |w| Ok(write_sweep_csv(&recs, w)?))
        }
        SweepKind::Offset {
            intervals,
            offsets,
            out: path,
        } => {
            let intervals = intervals.clone().unwrap_or_else(|| s.intervals_s.clone());
            let offsets = offsets.clone().unwrap_or_else(|| s.offsets_s.clone());
            let recs = sweep_window_offset(sc, &intervals, &offsets)?;
            with_output(path.as_deref(), out, |w| Ok(write_sweep_csv(&recs, w)?))
        }
        SweepKind::Inclination {
            max_elevations,
            altitude,
            interval,
            heading,
            out: path,
        } => {
            let mut cfg = InclinationSweep::from_scenario(
                sc,
                altitude.unwrap_or(s.inclination_altitude_m),
                interval.unwrap_or(s.inclination_interval_s),
            )?;
            if let Some(h) = heading {
                cfg.heading_deg = *h;
            }
            let elevations = max_elevations.clone().unwrap_or_else(|| s.max_elevations_deg.clone());
            let recs = sweep_inclination(&cfg, &elevations)?;
            with_output(path.as_deref(), out, |w| Ok(write_sweep_csv(&recs, w)?))
        }
        SweepKind::Grid {
            half_width,
            step,
            out: path,
        } => {
            let grid = GridSpec::around(
                &sc.user,
                half_width.unwrap_or(s.grid_half_width_deg),
                step.unwrap_or(s.grid_step_deg),
            );
            let recs = sweep_user_grid(sc, &grid)?;
            with_output(path.as_deref(), out, |w| Ok(write_grid_csv(&recs, w)?))
        }
    }
}
