use std::path::PathBuf;
use std::process::Command;

use leodop_cli::run;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn leodop(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["leodop"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).filter(|r| r.starts_with(' ')))
        .and_then(|r| r.split_whitespace().next())
        .unwrap_or_else(|| panic!("no {key} in report"))
        .parse()
        .unwrap()
}

#[test]
fn default_scenario_loads_and_echoes_defaults() {
    let (code, out, err) = leodop(&["ddop"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("barcelona.toml"));
    assert!(err.contains("default: mask_deg = 5"));
    assert!(out.contains("HDDOP"));
    let (_, _, quiet) = leodop(&["--quiet", "ddop"]);
    assert!(quiet.is_empty());
}

#[test]
fn ddop_report_carries_ratings() {
    let (code, out, _) = leodop(&["-q", "ddop"]);
    assert_eq!(code, 0);
    for name in ["PDDOP", "HDDOP", "CDDOP", "TDDOP"] {
        let l = out.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(
            ["Ideal", "Excellent", "Good", "Moderate", "Fair", "Poor"].iter().any(|r| l.ends_with(r)),
            "{l}"
        );
    }
    assert!(value(&out, "ellipse95_semi_major_m") > value(&out, "ellipse95_semi_minor_m"));
}

#[test]
fn noiseless_solve_recovers_the_user() {
    let (code, out, err) = leodop(&["-q", "--sigma", "0", "solve"]);
    assert_eq!(code, 0, "{err}");
    assert!(value(&out, "error_horizontal_m").abs() < 1e-3, "{out}");
}

#[test]
fn csv_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let (code, _, err) = leodop(&["-q", "--seed", "9", "montecarlo", "--trials", "20", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (_, s1, _) = leodop(&["-q", "sweep", "offset", "--intervals", "10,40"]);
    let (_, s2, _) = leodop(&["-q", "sweep", "offset", "--intervals", "10,40"]);
    assert_eq!(s1, s2);
    assert_eq!(s1.lines().count(), 1 + 2 * 31);
}

#[test]
fn seed_changes_the_trials() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    leodop(&["-q", "--seed", "1", "montecarlo", "--trials", "10", "--out", a.to_str().unwrap()]);
    leodop(&["-q", "--seed", "2", "montecarlo", "--trials", "10", "--out", b.to_str().unwrap()]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sweeps_write_csv() {
    let (code, out, _) = leodop(&["-q", "sweep", "count"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("observations,"), "{out}");
    assert_eq!(out.lines().count(), 8);

    let (code, out, _) = leodop(&["-q", "sweep", "inclination", "--max-elevations", "20,60"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);

    let (code, out, _) = leodop(&["-q", "sweep", "grid", "--half-width", "1", "--step", "1"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 10);
}

#[test]
fn propagate_and_predict_tables() {
    let (code, out, _) = leodop(&["-q", "propagate", "--step", "50"]);
    assert_eq!(code, 0);
    let header = out.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 10);
    assert_eq!(out.lines().count(), 1 + 7);

    let (code, out, _) = leodop(&["-q", "predict"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1 + 350);
}

#[test]
fn error_paths_map_to_exit_codes() {
    let (code, _, err) = leodop(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("USAGE: "));
    assert_eq!(err.lines().count(), 1);

    let (code, _, err) = leodop(&["--sigma", "-1", "ddop"]);
    assert_eq!(code, 1, "{err}");

    let (code, _, err) = leodop(&["--scenario", "/nonexistent/x.toml", "ddop"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("IO: "));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "user_lat_deg = 41.0\nuser_lon_deg = 2.0\nusers_height_m = 1\n").unwrap();
    let (code, _, err) = leodop(&["--scenario", bad.to_str().unwrap(), "ddop"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("UNKNOWN_KEY: "), "{err}");
    assert!(err.contains("user_height_m"));

    // a window far from any pass: nothing above the mask
    let tle = scenarios().join("orbcomm_sample.tle");
    let hidden = dir.path().join("hidden.toml");
    std::fs::write(
        &hidden,
        format!(
            "tle_file = {:?}\nuser_lat_deg = -60.0\nuser_lon_deg = 150.0\nwindow_start = \"2025-04-14T17:30:27Z\"\n",
            tle.to_str().unwrap()
        ),
    )
    .unwrap();
    let (code, _, err) = leodop(&["-q", "--scenario", hidden.to_str().unwrap(), "ddop"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn numerical_failure_exits_three() {
    // two repeated epochs cannot resolve four unknowns
    let dir = tempfile::tempdir().unwrap();
    let tle = scenarios().join("orbcomm_sample.tle");
    let p = dir.path().join("short.toml");
    std::fs::write(
        &p,
        format!(
            "tle_file = {:?}\nuser_lat_deg = 41.3976\nuser_lon_deg = 2.1497\nwindow_start = \"2025-04-14T17:33:20Z\"\nduration_s = 3.0\nsample_period_s = 1.0\n",
            tle.to_str().unwrap()
        ),
    )
    .unwrap();
    let (code, _, err) = leodop(&["-q", "--scenario", p.to_str().unwrap(), "ddop"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn scenario_lookup_by_name() {
    let (code, _, err) = leodop(&["--scenario", scenarios().join("barcelona.toml").to_str().unwrap(), "ddop"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_leodop");
    let st = Command::new(bin).arg("--help").output().unwrap();
    assert!(st.status.success());
    let st = Command::new(bin).env("LEODOP_SCENARIO_DIR", scenarios()).args(["--scenario", "barcelona", "-q", "ddop"]).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let st = Command::new(bin).arg("--nope").output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}
