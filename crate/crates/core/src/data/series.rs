//! Hourly `timestamp,value,unit` CSV series.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::env::advance_hours;
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:00:00Z";

/// Physical quantity carried by a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Stored in W, never negative.
    Power,
    /// Stored in €/kWh.
    Price,
    /// Stored in °C.
    Temperature,
}

/// Units accepted in the `unit` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    W,
    KW,
    MW,
    EurPerKwh,
    EurPerMwh,
    Celsius,
    Kelvin,
}

impl Unit {
    pub fn quantity(self) -> Quantity {
        match self {
            Unit::W | Unit::KW | Unit::MW => Quantity::Power,
            Unit::EurPerKwh | Unit::EurPerMwh => Quantity::Price,
            Unit::Celsius | Unit::Kelvin => Quantity::Temperature,
        }
    }

    /// Converts a value in this unit to the internal unit.
    pub fn to_internal(self, v: f64) -> f64 {
        match self {
            Unit::W | Unit::EurPerKwh | Unit::Celsius => v,
            Unit::KW => v * 1e3,
            Unit::MW => v * 1e6,
            Unit::EurPerMwh => v / 1e3,
            Unit::Kelvin => v - 273.15,
        }
    }

    pub fn from_internal(self, v: f64) -> f64 {
        match self {
            Unit::W | Unit::EurPerKwh | Unit::Celsius => v,
            Unit::KW => v / 1e3,
            Unit::MW => v / 1e6,
            Unit::EurPerMwh => v * 1e3,
            Unit::Kelvin => v + 273.15,
        }
    }

    /// Unit the library computes in.
    pub fn internal(q: Quantity) -> Unit {
        match q {
            Quantity::Power => Unit::W,
            Quantity::Price => Unit::EurPerKwh,
            Quantity::Temperature => Unit::Celsius,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::W => "W",
            Unit::KW => "kW",
            Unit::MW => "MW",
            Unit::EurPerKwh => "EUR/kWh",
            Unit::EurPerMwh => "EUR/MWh",
            Unit::Celsius => "C",
            Unit::Kelvin => "K",
        })
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm = s.trim().replace('€', "EUR");
        Ok(match norm.as_str() {
            "W" => Unit::W,
            "kW" => Unit::KW,
            "MW" => Unit::MW,
            "EUR/kWh" => Unit::EurPerKwh,
            "EUR/MWh" => Unit::EurPerMwh,
            "C" | "degC" | "°C" => Unit::Celsius,
            "K" => Unit::Kelvin,
            _ => return Err(format!("unknown unit '{}'", s.trim())),
        })
    }
}

/// Validated hourly series in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub start: NaiveDateTime,
    pub quantity: Quantity,
    pub values: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn is_leap_day(t: NaiveDateTime) -> bool {
    t.month() == 2 && t.day() == 29
}

/// The hour after `t`, skipping February 29.
fn next_hour(t: NaiveDateTime) -> NaiveDateTime {
    let mut n = t + Duration::hours(1);
    while is_leap_day(n) {
        n += Duration::hours(1);
    }
    n
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    let t = NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%SZ")
        .map_err(|e| format!("bad timestamp '{}': {e}", s.trim()))?;
    if t.minute() != 0 || t.second() != 0 {
        return Err(format!("timestamp '{}' is not on the hour", s.trim()));
    }
    Ok(t)
}

/// Reads and validates a series of the `expected` quantity.
///
/// February 29 rows are dropped. Rows are reported by file line, the
/// header being line 1.
pub fn load_series(path: &Path, expected: Quantity) -> Result<Series> {
    let text = fs::read_to_string(path)?;
    parse_series(&text, &path.display().to_string(), expected)
}

/// Parses CSV text; `origin` names the source in error messages.
pub fn parse_series(text: &str, origin: &str, expected: Quantity) -> Result<Series> {
    let err = |row: usize, message: String| Error::Load {
        path: origin.to_string(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["timestamp", "value", "unit"] {
        return Err(err(1, format!("expected header 'timestamp,value,unit', found '{}'", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut start = None;
    let mut prev: Option<NaiveDateTime> = None;
    let mut prev_raw: Option<NaiveDateTime> = None;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(err(row, format!("expected 3 fields, found {}", record.len())));
        }
        let t = parse_timestamp(&record[0]).map_err(|m| err(row, m))?;
        if let Some(p) = prev_raw {
            if t == p {
                return Err(err(row, format!("duplicate timestamp {}", format_timestamp(t))));
            }
            if t < p {
                return Err(err(row, format!("timestamp {} is not after {}", format_timestamp(t), format_timestamp(p))));
            }
        }
        prev_raw = Some(t);
        if is_leap_day(t) {
            continue;
        }
        if let Some(p) = prev {
            if t > next_hour(p) {
                return Err(err(row, format!("missing hour(s) between {} and {}", format_timestamp(p), format_timestamp(t))));
            }
        }
        let unit: Unit = record[2].parse().map_err(|m| err(row, m))?;
        if unit.quantity() != expected {
            return Err(err(row, format!("unit {unit} does not measure {expected:?}")));
        }
        let raw: f64 = record[1]
            .parse()
            .map_err(|_| err(row, format!("bad value '{}'", &record[1])))?;
        if !raw.is_finite() {
            return Err(err(row, format!("non-finite value '{}'", &record[1])));
        }
        let v = unit.to_internal(raw);
        if expected == Quantity::Power && v < 0.0 {
            return Err(err(row, format!("negative power {raw} {unit}")));
        }
        start.get_or_insert(t);
        prev = Some(t);
        values.push(v);
    }
    let start = start.ok_or_else(|| err(1, "no data rows".into()))?;
    Ok(Series {
        start,
        quantity: expected,
        values,
    })
}

/// Renders `series` in `unit`; the internal unit gives a value-exact
/// round trip.
pub fn series_to_csv(series: &Series, unit: Unit) -> Result<String> {
    if unit.quantity() != series.quantity {
        return Err(Error::config(format!("unit {unit} does not measure {:?}", series.quantity)));
    }
    let mut out = String::with_capacity(series.len() * 36 + 20);
    out.push_str("timestamp,value,unit\n");
    for (k, v) in series.values.iter().enumerate() {
        let t = advance_hours(series.start, k);
        out.push_str(&format!("{},{},{}\n", format_timestamp(t), unit.from_internal(*v), unit));
    }
    Ok(out)
}

pub fn save_series(path: &Path, series: &Series, unit: Unit) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, series_to_csv(series, unit)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    fn csv_of(rows: &[(NaiveDateTime, &str, &str)]) -> String {
        let mut s = String::from("timestamp,value,unit\n");
        for (t, v, u) in rows {
            s.push_str(&format!("{},{v},{u}\n", format_timestamp(*t)));
        }
        s
    }

    fn hourly(start: NaiveDateTime, n: usize, unit: &str) -> String {
        let rows: Vec<(NaiveDateTime, String, &str)> =
            (0..n).map(|k| (advance_hours(start, k), format!("{}", k as f64 * 0.5), unit)).collect();
        csv_of(&rows.iter().map(|(t, v, u)| (*t, v.as_str(), *u)).collect::<Vec<_>>())
    }

    #[test]
    fn full_year_loads() {
        let s = parse_series(&hourly(at(2019, 1, 1, 0), 8760, "W"), "y", Quantity::Power).unwrap();
        assert_eq!(s.len(), 8760);
        assert_eq!(s.values[3], 1.5);
    }

    #[test]
    fn kilowatts_are_scaled() {
        let text = csv_of(&[(at(2019, 1, 1, 0), "1.5", "kW"), (at(2019, 1, 1, 1), "2", "kW")]);
        let s = parse_series(&text, "k", Quantity::Power).unwrap();
        assert_eq!(s.values, vec![1500.0, 2000.0]);
    }

    #[test]
    fn megawatt_hour_prices_are_scaled() {
        let text = csv_of(&[(at(2019, 1, 1, 0), "250", "EUR/MWh"), (at(2019, 1, 1, 1), "0.3", "€/kWh")]);
        let s = parse_series(&text, "p", Quantity::Price).unwrap();
        assert_eq!(s.values, vec![0.25, 0.3]);
    }

    #[test]
    fn duplicate_hour_names_its_row() {
        let text = csv_of(&[
            (at(2019, 1, 1, 0), "1", "W"),
            (at(2019, 1, 1, 1), "1", "W"),
            (at(2019, 1, 1, 1), "1", "W"),
        ]);
        match parse_series(&text, "d.csv", Quantity::Power) {
            Err(Error::Load { row, message, .. }) => {
                assert_eq!(row, 4);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("expected load error, got {other:?}"),
        }
    }

    #[test]
    fn gap_is_reported() {
        let text = csv_of(&[(at(2019, 1, 1, 0), "1", "W"), (at(2019, 1, 1, 2), "1", "W")]);
        match parse_series(&text, "g", Quantity::Power) {
            Err(Error::Load { row, message, .. }) => {
                assert_eq!(row, 3);
                assert!(message.contains("missing"));
            }
            other => panic!("expected load error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_and_negative_values_fail() {
        let nan = csv_of(&[(at(2019, 1, 1, 0), "NaN", "W")]);
        assert!(matches!(parse_series(&nan, "n", Quantity::Power), Err(Error::Load { row: 2, .. })));
        let neg = csv_of(&[(at(2019, 1, 1, 0), "-1", "W")]);
        assert!(matches!(parse_series(&neg, "n", Quantity::Power), Err(Error::Load { row: 2, .. })));
        let cold = csv_of(&[(at(2019, 1, 1, 0), "-5", "C")]);
        assert_eq!(parse_series(&cold, "t", Quantity::Temperature).unwrap().values, vec![-5.0]);
    }

    #[test]
    fn unit_mismatch_fails() {
        let text = csv_of(&[(at(2019, 1, 1, 0), "1", "kW")]);
        assert!(matches!(parse_series(&text, "u", Quantity::Price), Err(Error::Load { .. })));
        let text = csv_of(&[(at(2019, 1, 1, 0), "1", "furlongs")]);
        assert!(matches!(parse_series(&text, "u", Quantity::Power), Err(Error::Load { .. })));
    }

    #[test]
    fn leap_day_is_dropped() {
        let mut t = at(2020, 2, 28, 22);
        let mut rows = Vec::new();
        for _ in 0..28 {
            rows.push((t, "1", "W"));
            t += Duration::hours(1);
        }
        let s = parse_series(&csv_of(&rows), "leap", Quantity::Power).unwrap();
        // 2 hours of Feb 28, 24 dropped, 2 hours of Mar 1.
        assert_eq!(s.len(), 4);
        assert_eq!(advance_hours(s.start, 2), at(2020, 3, 1, 0));
    }

    #[test]
    fn leap_year_without_feb_29_is_contiguous() {
        let text = csv_of(&[(at(2020, 2, 28, 23), "1", "W"), (at(2020, 3, 1, 0), "2", "W")]);
        assert_eq!(parse_series(&text, "l", Quantity::Power).unwrap().len(), 2);
    }

    #[test]
    fn round_trip_is_value_exact() {
        let series = Series {
            start: at(2019, 12, 31, 20),
            quantity: Quantity::Price,
            values: vec![0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-17, 123456.789],
        };
        let text = series_to_csv(&series, Unit::EurPerKwh).unwrap();
        assert_eq!(parse_series(&text, "r", Quantity::Price).unwrap(), series);
    }

    #[test]
    fn bad_header_fails() {
        let text = "time,value\n2019-01-01T00:00:00Z,1\n";
        assert!(matches!(parse_series(text, "h", Quantity::Power), Err(Error::Load { row: 1, .. })));
    }
}
