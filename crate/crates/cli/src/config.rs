//! Scenario files: flat `key = value` TOML with a fixed set of keys.
//!
//! Every key is optional except the user coordinates, the window start and
//! one orbit source (`tle_file` or `synthetic_altitude_m`). Omitted keys take
//! the defaults listed in [`KEYS`]; the ones actually applied are returned so
//! they can be echoed.

use std::fmt;
use std::path::{Path, PathBuf};

use leodop_core::constants::{DEFAULT_MASK_DEG, DEFAULT_WAVELENGTH};
use leodop_core::ddop::AxisConvention;
use leodop_core::doppler::NoiseModel;
use leodop_core::estimator::{SolveMode, SolverConfig, VerticalConstraint};
use leodop_core::experiments::{default_intervals, default_max_elevations, default_offsets, DEFAULT_COUNTS};
use leodop_core::geometry::GeodeticPosition;
use leodop_core::orbit::{parse_tle, CircularOrbit, OrbitSource};
use leodop_core::scenario::Scenario;
use leodop_core::time::parse_iso;
use toml::Value;

/// Accepted keys and a one-line description of each.
pub const KEYS: &[(&str, &str)] = &[
    ("tle_file", "TLE file, relative to the scenario file"),
    ("satellite", "name of the TLE record to use (default: first record)"),
    ("synthetic_altitude_m", "circular orbit altitude; selects a synthetic orbit instead of a TLE"),
    ("synthetic_heading_deg", "ground-track azimuth at the reference epoch (default 0)"),
    ("synthetic_track_offset_m", "ground-track offset from the user (default 0)"),
    ("synthetic_reference_epoch", "epoch of closest approach (default: window centre)"),
    ("user_lat_deg", "user geodetic latitude (required)"),
    ("user_lon_deg", "user geodetic longitude (required)"),
    ("user_height_m", "user ellipsoidal height (default 0)"),
    ("window_start", "first observation epoch, ISO-8601 UTC (required)"),
    ("duration_s", "observation window length (default 350)"),
    ("sample_period_s", "spacing between observations (default 1)"),
    ("sigma_dopp_mps", "zenith range-rate noise deviation (default 0.5)"),
    ("sigma_dopp_hz", "zenith Doppler noise deviation in Hz, converted with the wavelength"),
    ("elevation_scaled_noise", "scale the deviation by 1/sin(elevation) (default true)"),
    ("seed", "base random seed (default 0)"),
    ("solver_mode", "\"horizontal4\" or \"full5\" (default horizontal4)"),
    ("vertical_constraint", "\"local_up\" or \"ecef_z\" (default local_up)"),
    ("max_iterations", "solver iteration cap (default 25)"),
    ("step_tolerance", "convergence threshold on the scaled step norm (default 1e-4)"),
    ("carrier_wavelength_m", "carrier wavelength (default c/137.5 MHz)"),
    ("mask_deg", "elevation mask (default 5)"),
    ("true_clock_drift_mps", "simulated c times receiver clock drift (default 0)"),
    ("true_time_offset_s", "simulated ephemeris time offset (default 0)"),
    ("axis_convention", "\"horizontal\" or \"rtn3d\" along/cross axes (default horizontal)"),
    ("initial_east_m", "solve: initial guess east of the truth (default 0)"),
    ("initial_north_m", "solve: initial guess north of the truth (default 0)"),
    ("initial_time_offset_s", "solve: initial time offset (default 0)"),
    ("initial_clock_drift_mps", "solve: initial scaled clock drift (default 0)"),
    ("mc_trials", "Monte Carlo trial count (default 1000)"),
    ("sweep_counts", "observation counts of the count sweep"),
    ("sweep_intervals_s", "sampling intervals of the sampling and offset sweeps"),
    ("sweep_offsets_s", "window offsets of the offset sweep"),
    ("sweep_max_elevations_deg", "maximum elevations of the inclination sweep"),
    ("inclination_altitude_m", "altitude of the synthetic passes (default 715e3)"),
    ("inclination_interval_s", "observation spacing of the inclination sweep (default 60)"),
    ("grid_half_width_deg", "half width of the user grid (default 5)"),
    ("grid_step_deg", "user grid spacing (default 0.5)"),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: cannot parse `{key}`: {message}")]
    Parse { line: usize, key: String, message: String },
    #[error("invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },
    #[error("unknown key `{key}`{}", suggestion_text(.suggestion))]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("cannot read {}: {source}", .path.display())]
    Read { path: PathBuf, source: std::io::Error },
}

fn suggestion_text(s: &Option<String>) -> String {
    match s {
        Some(k) => format!(" (did you mean `{k}`?)"),
        None => String::new(),
    }
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "PARSE_ERROR",
            ConfigError::Validation { .. } => "VALIDATION_ERROR",
            ConfigError::UnknownKey { .. } => "UNKNOWN_KEY",
            ConfigError::Read { .. } => "IO",
        }
    }
}

fn invalid(key: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Initial guess of the `solve` command, relative to the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub east_m: f64,
    pub north_m: f64,
    pub time_offset_s: f64,
    pub clock_drift_mps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub counts: Vec<usize>,
    pub intervals_s: Vec<f64>,
    pub offsets_s: Vec<f64>,
    pub max_elevations_deg: Vec<f64>,
    pub inclination_altitude_m: f64,
    pub inclination_interval_s: f64,
    pub grid_half_width_deg: f64,
    pub grid_step_deg: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub path: PathBuf,
    pub scenario: Scenario,
    pub initial: InitialGuess,
    pub mc_trials: usize,
    pub sweeps: SweepSettings,
    /// `key = value` for every default that was applied.
    pub defaults_applied: Vec<String>,
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut file = parse_scenario(&text, base)?;
    file.path = path.to_path_buf();
    Ok(file)
}

/// Parses scenario text; relative file references resolve against `base`.
/// The returned `path` is empty.
pub fn parse_scenario(text: &str, base: &Path) -> Result<ScenarioFile, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let start = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
        let line = text[..start].matches('\n').count() + 1;
        let source_line = text.lines().nth(line - 1).unwrap_or("");
        let key = source_line.split('=').next().unwrap_or("").trim();
        ConfigError::Parse {
            line,
            key: key.trim_matches(|c| c == '[' || c == ']').to_string(),
            message: e.message().trim().to_string(),
        }
    })?;
    for (key, value) in &table {
        if !KEYS.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::UnknownKey {
                key: key.clone(),
                suggestion: suggest(key),
            });
        }
        if value.is_table() {
            return Err(ConfigError::Parse {
                line: line_of(text, key),
                key: key.clone(),
                message: "nested tables are not supported; use flat keys".into(),
            });
        }
    }
    let mut f = Fields {
        table: &table,
        defaults: Vec::new(),
    };

    let user = GeodeticPosition::new(
        f.required_float("user_lat_deg")?,
        f.required_float("user_lon_deg")?,
        f.float_or("user_height_m", 0.0)?,
    );
    if !(-90.0..=90.0).contains(&user.latitude_deg) {
        return Err(invalid("user_lat_deg", "must lie in [-90, 90]"));
    }
    if !(-180.0..=360.0).contains(&user.longitude_deg) {
        return Err(invalid("user_lon_deg", "must lie in [-180, 360]"));
    }
    if !(-1e3..=1e4).contains(&user.height_m) {
        return Err(invalid("user_height_m", "must lie in [-1000, 10000] m"));
    }

    let start_text = f.required_text("window_start")?;
    let window_start = parse_iso(&start_text).ok_or_else(|| invalid("window_start", "not an ISO-8601 UTC instant"))?;
    let duration_s = f.float_or("duration_s", 350.0)?;
    if !(duration_s > 0.0) {
        return Err(invalid("duration_s", "must be positive"));
    }
    let sample_period_s = f.float_or("sample_period_s", 1.0)?;
    if !(sample_period_s > 0.0) {
        return Err(invalid("sample_period_s", "must be positive"));
    }

    let carrier_wavelength = f.float_or("carrier_wavelength_m", DEFAULT_WAVELENGTH)?;
    if !(carrier_wavelength > 0.0) {
        return Err(invalid("carrier_wavelength_m", "must be positive"));
    }
    let sigma_dopp = match (f.float("sigma_dopp_mps")?, f.float("sigma_dopp_hz")?) {
        (Some(_), Some(_)) => return Err(invalid("sigma_dopp_hz", "give either sigma_dopp_mps or sigma_dopp_hz")),
        (Some(s), None) => s,
        (None, Some(hz)) => leodop_core::ddop::sigma_from_hz(hz, carrier_wavelength),
        (None, None) => f.float_or("sigma_dopp_mps", 0.5)?,
    };
    if !(sigma_dopp >= 0.0) {
        return Err(invalid("sigma_dopp_mps", "must be non-negative"));
    }
    let noise = NoiseModel {
        sigma_dopp,
        elevation_scaled: f.bool_or("elevation_scaled_noise", true)?,
        seed: f.uint_or("seed", 0)?,
    };

    let mode = match f.text_or("solver_mode", "horizontal4")?.as_str() {
        "horizontal4" => SolveMode::Horizontal4State,
        "full5" => SolveMode::Full5State,
        other => return Err(invalid("solver_mode", format!("`{other}` is not horizontal4 or full5"))),
    };
    let vertical_constraint = match f.text_or("vertical_constraint", "local_up")?.as_str() {
        "local_up" => VerticalConstraint::LocalUp,
        "ecef_z" => VerticalConstraint::EcefZ,
        other => return Err(invalid("vertical_constraint", format!("`{other}` is not local_up or ecef_z"))),
    };
    let max_iterations = f.uint_or("max_iterations", 25)? as usize;
    if max_iterations == 0 {
        return Err(invalid("max_iterations", "must be at least 1"));
    }
    let step_tolerance = f.float_or("step_tolerance", 1e-4)?;
    if !(step_tolerance > 0.0) {
        return Err(invalid("step_tolerance", "must be positive"));
    }
    let solver = SolverConfig {
        max_iterations,
        step_tolerance,
        mode,
        vertical_constraint,
    };

    let mask_deg = f.float_or("mask_deg", DEFAULT_MASK_DEG)?;
    if !(0.0..90.0).contains(&mask_deg) {
        return Err(invalid("mask_deg", "must lie in [0, 90)"));
    }
    let true_time_offset = f.float_or("true_time_offset_s", 0.0)?;
    if !(true_time_offset.abs() < 10.0) {
        return Err(invalid("true_time_offset_s", "must lie within (-10, 10) s"));
    }
    let true_clock_drift_scaled = f.float_or("true_clock_drift_mps", 0.0)?;
    let axis_convention = match f.text_or("axis_convention", "horizontal")?.as_str() {
        "horizontal" => AxisConvention::HorizontalProjection,
        "rtn3d" => AxisConvention::Rtn3d,
        other => return Err(invalid("axis_convention", format!("`{other}` is not horizontal or rtn3d"))),
    };

    let window_centre = leodop_core::time::add_seconds(window_start, duration_s / 2.0);
    let source = orbit_source(&mut f, base, window_centre, &user)?;

    let initial = InitialGuess {
        east_m: f.float_or("initial_east_m", 0.0)?,
        north_m: f.float_or("initial_north_m", 0.0)?,
        time_offset_s: f.float_or("initial_time_offset_s", 0.0)?,
        clock_drift_mps: f.float_or("initial_clock_drift_mps", 0.0)?,
    };
    let mc_trials = f.uint_or("mc_trials", 1000)? as usize;
    if mc_trials < 2 {
        return Err(invalid("mc_trials", "must be at least 2"));
    }

    let sweeps = SweepSettings {
        counts: f.uint_list_or("sweep_counts", DEFAULT_COUNTS.to_vec())?,
        intervals_s: f.float_list_or("sweep_intervals_s", default_intervals())?,
        offsets_s: f.float_list_or("sweep_offsets_s", default_offsets())?,
        max_elevations_deg: f.float_list_or("sweep_max_elevations_deg", default_max_elevations())?,
        inclination_altitude_m: f.float_or("inclination_altitude_m", 715e3)?,
        inclination_interval_s: f.float_or("inclination_interval_s", 60.0)?,
        grid_half_width_deg: f.float_or("grid_half_width_deg", 5.0)?,
        grid_step_deg: f.float_or("grid_step_deg", 0.5)?,
    };
    if sweeps.counts.iter().any(|&n| n < 4) {
        return Err(invalid("sweep_counts", "every count must be at least 4"));
    }
    if !(sweeps.grid_step_deg > 0.0) || !(sweeps.grid_half_width_deg >= 0.0) {
        return Err(invalid("grid_step_deg", "grid step must be positive and half width non-negative"));
    }

    let scenario = Scenario {
        source,
        user,
        window_start,
        duration_s,
        sample_period_s,
        noise,
        solver,
        carrier_wavelength,
        mask_deg,
        true_clock_drift_scaled,
        true_time_offset,
        axis_convention,
    };
    Ok(ScenarioFile {
        path: PathBuf::new(),
        scenario,
        initial,
        mc_trials,
        sweeps,
        defaults_applied: f.defaults,
    })
}

fn orbit_source(
    f: &mut Fields<'_>,
    base: &Path,
    window_centre: leodop_core::time::Epoch,
    user: &GeodeticPosition,
) -> Result<OrbitSource, ConfigError> {
    let tle = f.text("tle_file")?;
    let altitude = f.float("synthetic_altitude_m")?;
    match (tle, altitude) {
        (Some(_), Some(_)) => Err(invalid("synthetic_altitude_m", "give either tle_file or synthetic_altitude_m")),
        (None, None) => Err(invalid("tle_file", "an orbit source is required (tle_file or synthetic_altitude_m)")),
        (Some(file), None) => {
            let path = base.join(&file);
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
            let records = parse_tle(&text).map_err(|e| invalid("tle_file", format!("{}: {e}", path.display())))?;
            let record = match f.text("satellite")? {
                Some(name) => records
                    .into_iter()
                    .find(|r| r.name.trim() == name.trim())
                    .ok_or_else(|| invalid("satellite", format!("no record named `{name}` in {}", path.display())))?,
                None => records
                    .into_iter()
                    .next()
                    .ok_or_else(|| invalid("tle_file", "file holds no element sets"))?,
            };
            OrbitSource::from_tle(record).map_err(|e| invalid("tle_file", e))
        }
        (None, Some(altitude_m)) => {
            let reference = match f.text("synthetic_reference_epoch")? {
                Some(s) => parse_iso(&s).ok_or_else(|| invalid("synthetic_reference_epoch", "not an ISO-8601 UTC instant"))?,
                None => window_centre,
            };
            let orbit = CircularOrbit::new(
                *user,
                altitude_m,
                f.float_or("synthetic_heading_deg", 0.0)?,
                f.float_or("synthetic_track_offset_m", 0.0)?,
                reference,
            )
            .map_err(|e| invalid("synthetic_altitude_m", e))?;
            Ok(OrbitSource::SyntheticCircular(orbit))
        }
    }
}

/// Closest known key by edit distance, if reasonably close.
pub fn suggest(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|(k, _)| (strsim::levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= k.len().max(key.len()) / 2)
        .min()
        .map(|(_, k)| k.to_string())
}

/// 1-based line where `key` is assigned or opens a table, or 1.
fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.starts_with(&format!("[{key}]")) || l.split('=').next().map(str::trim) == Some(key)
        })
        .map_or(1, |i| i + 1)
}

struct Fields<'a> {
    table: &'a toml::Table,
    defaults: Vec<String>,
}

impl Fields<'_> {
    fn note_default(&mut self, key: &str, shown: impl fmt::Display) {
        let entry = format!("{key} = {shown}");
        if !self.defaults.contains(&entry) {
            self.defaults.push(entry);
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => as_float(v).map(Some).ok_or_else(|| invalid(key, "expected a number")),
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.float(key)? {
            Some(v) if v.is_finite() => Ok(v),
            Some(_) => Err(invalid(key, "must be finite")),
            None => {
                self.note_default(key, default);
                Ok(default)
            }
        }
    }

    fn required_float(&self, key: &str) -> Result<f64, ConfigError> {
        match self.float(key)? {
            Some(v) if v.is_finite() => Ok(v),
            Some(_) => Err(invalid(key, "must be finite")),
            None => Err(invalid(key, "required key is missing")),
        }
    }

    fn uint_or(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.table.get(key) {
            None => {
                self.note_default(key, default);
                Ok(default)
            }
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(invalid(key, "expected a non-negative integer")),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.table.get(key) {
            None => {
                self.note_default(key, default);
                Ok(default)
            }
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(invalid(key, "expected true or false")),
        }
    }

    fn text(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(invalid(key, "expected a string")),
        }
    }

    fn text_or(&mut self, key: &str, default: &str) -> Result<String, ConfigError> {
        match self.text(key)? {
            Some(s) => Ok(s),
            None => {
                self.note_default(key, format!("\"{default}\""));
                Ok(default.to_string())
            }
        }
    }

    fn required_text(&self, key: &str) -> Result<String, ConfigError> {
        self.text(key)?.ok_or_else(|| invalid(key, "required key is missing"))
    }

    fn float_list_or(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        match self.table.get(key) {
            None => {
                self.note_default(key, format!("{default:?}"));
                Ok(default)
            }
            Some(Value::Array(items)) if !items.is_empty() => items
                .iter()
                .map(|v| as_float(v).filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| invalid(key, "expected an array of numbers")),
            Some(_) => Err(invalid(key, "expected a non-empty array of numbers")),
        }
    }

    fn uint_list_or(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>, ConfigError> {
        match self.table.get(key) {
            None => {
                self.note_default(key, format!("{default:?}"));
                Ok(default)
            }
            Some(Value::Array(items)) if !items.is_empty() => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Some(*i as usize),
                    _ => None,
                })
                .collect::<Option<Vec<usize>>>()
                .ok_or_else(|| invalid(key, "expected an array of non-negative integers")),
            Some(_) => Err(invalid(key, "expected a non-empty array of integers")),
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}
