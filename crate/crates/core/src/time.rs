//! UTC instants and second-resolution arithmetic.

use chrono::{DateTime, Duration, SecondsFormat, TimeZone, Utc};

/// A UTC instant.
pub type Epoch = DateTime<Utc>;

/// Seconds elapsed from `from` to `to` (negative if `to` is earlier).
pub fn seconds_between(from: Epoch, to: Epoch) -> f64 {
    let d = to - from;
    let secs = d.num_seconds();
    let rem = d - Duration::seconds(secs);
    secs as f64 + rem.num_nanoseconds().unwrap_or(0) as f64 * 1e-9
}

/// `t + seconds`, rounded to the nearest nanosecond.
pub fn add_seconds(t: Epoch, seconds: f64) -> Epoch {
    let whole = seconds.trunc();
    let nanos = ((seconds - whole) * 1e9).round();
    t + Duration::seconds(whole as i64) + Duration::nanoseconds(nanos as i64)
}

/// `count` epochs starting at `start`, spaced `step` seconds apart.
pub fn epoch_grid(start: Epoch, step: f64, count: usize) -> Vec<Epoch> {
    (0..count).map(|i| add_seconds(start, step * i as f64)).collect()
}

/// ISO-8601 rendering with millisecond precision, e.g. `2025-04-14T17:30:27.000Z`.
pub fn format_iso(t: Epoch) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Parses an ISO-8601 / RFC 3339 UTC instant. A missing zone suffix is read
/// as UTC.
pub fn parse_iso(s: &str) -> Option<Epoch> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    None
}

/// Greenwich mean sidereal time (IAU 1982), radians in `[0, 2π)`.
pub fn gmst(t: Epoch) -> f64 {
    sgp4::iau_epoch_to_sidereal_time(sgp4::julian_years_since_j2000(&t.naive_utc()))
}
