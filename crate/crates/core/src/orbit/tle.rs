//! Two-line element set ingestion.

use chrono::{Duration, TimeZone, Utc};

use crate::time::Epoch;
use crate::{Error, Result};

const LINE_LEN: usize = 69;

/// One decoded element set.
#[derive(Debug, Clone, PartialEq)]
pub struct TleRecord {
    pub name: String,
    pub line1: String,
    pub line2: String,
    pub norad_id: u32,
    pub epoch: Epoch,
    /// First derivative of mean motion divided by two, rev/day².
    pub mean_motion_dot: f64,
    /// Second derivative of mean motion divided by six, rev/day³.
    pub mean_motion_ddot: f64,
    /// B* drag term, 1/earth-radii.
    pub bstar: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub eccentricity: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
    /// Mean motion, rev/day.
    pub mean_motion: f64,
    pub revolution_number: u32,
}

/// Modulo-10 checksum over the first 68 characters: digits count their
/// value, `-` counts one, everything else zero.
pub fn checksum(line: &str) -> u8 {
    let sum: u32 = line
        .bytes()
        .take(LINE_LEN - 1)
        .map(|b| match b {
            b'0'..=b'9' => (b - b'0') as u32,
            b'-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

/// Parses a concatenation of 2-line or 3-line (named) TLE blocks.
///
/// Blank lines are skipped; a name line may carry the `0 ` prefix used by
/// some catalogs. Line numbers in errors are 1-based positions in `text`.
pub fn parse_tle(text: &str) -> Result<Vec<TleRecord>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    let mut records = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (no, line) = lines[i];
        let name = if line.starts_with("1 ") && line.len() == LINE_LEN {
            String::new()
        } else {
            i += 1;
            let name = line.strip_prefix("0 ").unwrap_or(line).trim();
            name.to_string()
        };
        let Some(&(no1, l1)) = lines.get(i) else {
            return Err(Error::TruncatedInput { line: no });
        };
        let Some(&(no2, l2)) = lines.get(i + 1) else {
            return Err(Error::TruncatedInput { line: no1 });
        };
        records.push(parse_block(name, (no1, l1), (no2, l2))?);
        i += 2;
    }
    Ok(records)
}

fn parse_block(name: String, line1: (usize, &str), line2: (usize, &str)) -> Result<TleRecord> {
    let (no1, l1) = line1;
    let (no2, l2) = line2;
    check_line(no1, l1, b'1')?;
    check_line(no2, l2, b'2')?;

    let f1 = Fields { line: no1, text: l1 };
    let f2 = Fields { line: no2, text: l2 };

    let norad_id: u32 = f1.parse("satellite number", 3, 7)?;
    let norad_id2: u32 = f2.parse("satellite number", 3, 7)?;
    if norad_id != norad_id2 {
        return Err(Error::MalformedField {
            line: no2,
            field: "satellite number",
            columns: (3, 7),
        });
    }

    let year2: i32 = f1.parse("epoch year", 19, 20)?;
    let day: f64 = f1.parse("epoch day", 21, 32)?;
    if !(1.0..367.0).contains(&day) {
        return Err(f1.malformed("epoch day", 21, 32));
    }
    let year = if year2 < 57 { 2000 + year2 } else { 1900 + year2 };
    let jan1 = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap();
    let nanos = ((day - 1.0) * 86_400e9).round() as i64;
    let epoch = jan1 + Duration::nanoseconds(nanos);

    let mean_motion_dot: f64 = f1.parse("mean motion dot", 34, 43)?;
    let mean_motion_ddot = f1.implied_exponent("mean motion ddot", 45, 52)?;
    let bstar = f1.implied_exponent("bstar", 54, 61)?;

    let inclination_deg: f64 = f2.parse("inclination", 9, 16)?;
    if !(0.0..=180.0).contains(&inclination_deg) {
        return Err(f2.malformed("inclination", 9, 16));
    }
    let raan_deg: f64 = f2.parse("raan", 18, 25)?;
    let ecc_digits = f2.slice(27, 33);
    if !ecc_digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(f2.malformed("eccentricity", 27, 33));
    }
    let eccentricity: f64 = format!("0.{ecc_digits}")
        .parse()
        .map_err(|_| f2.malformed("eccentricity", 27, 33))?;
    let arg_perigee_deg: f64 = f2.parse("argument of perigee", 35, 42)?;
    let mean_anomaly_deg: f64 = f2.parse("mean anomaly", 44, 51)?;
    let mean_motion: f64 = f2.parse("mean motion", 53, 63)?;
    if mean_motion <= 0.0 {
        return Err(f2.malformed("mean motion", 53, 63));
    }
    let rev = f2.slice(64, 68).trim();
    let revolution_number = if rev.is_empty() {
        0
    } else {
        rev.parse().map_err(|_| f2.malformed("revolution number", 64, 68))?
    };

    Ok(TleRecord {
        name,
        line1: l1.to_string(),
        line2: l2.to_string(),
        norad_id,
        epoch,
        mean_motion_dot,
        mean_motion_ddot,
        bstar,
        inclination_deg,
        raan_deg,
        eccentricity,
        arg_perigee_deg,
        mean_anomaly_deg,
        mean_motion,
        revolution_number,
    })
}

fn check_line(no: usize, line: &str, expected_number: u8) -> Result<()> {
    if !line.is_ascii() || line.len() != LINE_LEN {
        return Err(Error::MalformedField {
            line: no,
            field: "line length",
            columns: (1, LINE_LEN),
        });
    }
    let bytes = line.as_bytes();
    if bytes[0] != expected_number || bytes[1] != b' ' {
        return Err(Error::MalformedField {
            line: no,
            field: "line number",
            columns: (1, 2),
        });
    }
    let last = bytes[LINE_LEN - 1];
    if !last.is_ascii_digit() {
        return Err(Error::MalformedField {
            line: no,
            field: "checksum",
            columns: (LINE_LEN, LINE_LEN),
        });
    }
    let found = last - b'0';
    let expected = checksum(line);
    if found != expected {
        return Err(Error::ChecksumMismatch {
            line: no,
            expected,
            found,
        });
    }
    Ok(())
}

struct Fields<'a> {
    line: usize,
    text: &'a str,
}

impl Fields<'_> {
    /// 1-based inclusive column range.
    fn slice(&self, from: usize, to: usize) -> &str {
        &self.text[from - 1..to]
    }

    fn malformed(&self, field: &'static str, from: usize, to: usize) -> Error {
        Error::MalformedField {
            line: self.line,
            field,
            columns: (from, to),
        }
    }

    fn parse<T: std::str::FromStr>(&self, field: &'static str, from: usize, to: usize) -> Result<T> {
        self.slice(from, to)
            .trim()
            .parse()
            .map_err(|_| self.malformed(field, from, to))
    }

    /// Decodes the `±NNNNN±E` notation: mantissa with an implied leading
    /// decimal point followed by a signed power-of-ten exponent.
    fn implied_exponent(&self, field: &'static str, from: usize, to: usize) -> Result<f64> {
        let raw = self.slice(from, to).trim();
        if raw.is_empty() {
            return Ok(0.0);
        }
        let err = || self.malformed(field, from, to);
        let (sign, body) = match raw.as_bytes()[0] {
            b'-' => (-1.0, &raw[1..]),
            b'+' => (1.0, &raw[1..]),
            _ => (1.0, raw),
        };
        let split = body.rfind(['-', '+']).ok_or_else(err)?;
        let (mantissa, exponent) = body.split_at(split);
        if mantissa.is_empty() || !mantissa.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let mantissa: f64 = format!("0.{mantissa}").parse().map_err(|_| err())?;
        let exponent: i32 = exponent.parse().map_err(|_| err())?;
        Ok(sign * mantissa * 10f64.powi(exponent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISS: &str = "ISS (ZARYA)
1 25544U 98067A   20194.88612269 -.00002218  00000-0 -31515-4 0  9992
2 25544  51.6461 221.2784 0001413  89.1723 280.4612 15.49507896236008
";

    #[test]
    fn decodes_fixed_columns() {
        let recs = parse_tle(ISS).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.name, "ISS (ZARYA)");
        assert_eq!(r.norad_id, 25544);
        assert_eq!(r.inclination_deg, 51.6461);
        assert_eq!(r.raan_deg, 221.2784);
        assert_eq!(r.eccentricity, 0.0001413);
        assert_eq!(r.arg_perigee_deg, 89.1723);
        assert_eq!(r.mean_anomaly_deg, 280.4612);
        assert_eq!(r.mean_motion, 15.49507896);
        assert_eq!(r.revolution_number, 23600);
        assert_eq!(r.mean_motion_dot, -0.00002218);
        assert_eq!(r.mean_motion_ddot, 0.0);
        assert!((r.bstar - (-0.31515e-4)).abs() < 1e-18);
        assert_eq!(
            crate::time::format_iso(r.epoch),
            "2020-07-12T21:16:01.000Z"
        );
    }

    #[test]
    fn two_line_blocks_without_names() {
        let two: String = ISS.lines().skip(1).map(|l| format!("{l}\n")).collect();
        let recs = parse_tle(&format!("{two}\n{two}")).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].name.is_empty());
    }

    #[test]
    fn altered_checksum_is_rejected() {
        let bad = ISS.replace("0  9992", "0  9993");
        match parse_tle(&bad) {
            Err(Error::ChecksumMismatch { line, expected, found }) => {
                assert_eq!((line, expected, found), (2, 2, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(parse_tle("").unwrap().is_empty());
        assert!(parse_tle("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn truncated_input() {
        let cut: String = ISS.lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_tle(&cut), Err(Error::TruncatedInput { .. })));
        assert!(matches!(parse_tle("LONELY NAME"), Err(Error::TruncatedInput { line: 1 })));
    }

    #[test]
    fn short_line_is_malformed() {
        let bad = ISS.replace(" 15.49507896236008", " 15.4950789623600");
        assert!(matches!(
            parse_tle(&bad),
            Err(Error::MalformedField { field: "line length", line: 3, .. })
        ));
    }

    #[test]
    fn garbage_field_reports_columns() {
        // Corrupt the inclination and re-sign the line so the checksum passes.
        let mut l2 = String::from("2 25544  51.6X61 221.2784 0001413  89.1723 280.4612 15.4950789623600");
        l2.push((b'0' + checksum(&l2)) as char);
        let l1 = ISS.lines().nth(1).unwrap();
        match parse_tle(&format!("{l1}\n{l2}\n")) {
            Err(Error::MalformedField { field, columns, line }) => {
                assert_eq!((field, columns, line), ("inclination", (9, 16), 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn implied_exponent_notation() {
        let f = Fields { line: 1, text: " 12345-3  -11606-4 +00000+0" };
        assert!((f.implied_exponent("x", 1, 8).unwrap() - 0.12345e-3).abs() < 1e-18);
        assert!((f.implied_exponent("x", 10, 18).unwrap() + 0.11606e-4).abs() < 1e-18);
        assert_eq!(f.implied_exponent("x", 20, 27).unwrap(), 0.0);
    }
}
