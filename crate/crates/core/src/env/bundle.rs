use std::ops::Range;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microgrid::PriceQuote;

/// Steps in a 365-day year of hourly data.
pub const HOURS_PER_YEAR: usize = 8760;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.0 * SECONDS_PER_DAY;

/// Time-aligned exogenous series driving the environment.
///
/// All series share the same length and step. February 29 never appears:
/// the calendar used for timestamps skips it, so every year has 8760 hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousBundle {
    /// Timestamp of the first row.
    pub start: NaiveDateTime,
    pub step_seconds: f64,
    /// PV generation [W].
    pub generation: Vec<f64>,
    pub profile_ids: Vec<String>,
    /// One demand series [W] per profile.
    pub demand: Vec<Vec<f64>>,
    /// Buying price [€/kWh].
    pub p_buy: Vec<f64>,
    /// Selling price [€/kWh].
    pub p_sell: Vec<f64>,
    /// Ambient temperature [°C].
    pub ambient: Vec<f64>,
}

impl ExogenousBundle {
    pub fn len(&self) -> usize {
        self.generation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generation.is_empty()
    }

    pub fn n_profiles(&self) -> usize {
        self.demand.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::config("bundle has no steps"));
        }
        if self.demand.is_empty() {
            return Err(Error::config("bundle has no demand profiles"));
        }
        if self.profile_ids.len() != self.demand.len() {
            return Err(Error::config("profile ids and demand series disagree in count"));
        }
        if !(self.step_seconds > 0.0) {
            return Err(Error::config("step length must be positive"));
        }
        let named = [
            ("p_buy", &self.p_buy),
            ("p_sell", &self.p_sell),
            ("ambient", &self.ambient),
        ];
        for (name, s) in named {
            if s.len() != n {
                return Err(Error::config(format!("{name} has {} steps, generation has {n}", s.len())));
            }
        }
        for (id, d) in self.profile_ids.iter().zip(&self.demand) {
            if d.len() != n {
                return Err(Error::config(format!("profile {id} has {} steps, generation has {n}", d.len())));
            }
            if let Some(k) = d.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::config(format!("profile {id}: invalid demand at step {k}")));
            }
        }
        if let Some(k) = self.generation.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(format!("invalid generation at step {k}")));
        }
        if let Some(k) = self.ambient.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("invalid ambient temperature at step {k}")));
        }
        for k in 0..n {
            PriceQuote::new(self.p_buy[k], self.p_sell[k])
                .map_err(|e| Error::config(format!("step {k}: {e}")))?;
        }
        Ok(())
    }

    pub fn quote(&self, k: usize) -> PriceQuote {
        PriceQuote {
            p_buy: self.p_buy[k],
            p_sell: self.p_sell[k],
        }
    }

    /// Seconds elapsed since January 1st 00:00 of the first row's year, on
    /// the 365-day calendar.
    pub fn start_offset_seconds(&self) -> f64 {
        seconds_into_year(self.start)
    }

    /// Timestamp of row `k`.
    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        advance_hours(self.start, k)
    }

    /// Rows `range`, with the start timestamp moved accordingly.
    pub fn slice(&self, range: Range<usize>) -> ExogenousBundle {
        let cut = |v: &Vec<f64>| v[range.clone()].to_vec();
        ExogenousBundle {
            start: self.timestamp(range.start),
            step_seconds: self.step_seconds,
            generation: cut(&self.generation),
            profile_ids: self.profile_ids.clone(),
            demand: self.demand.iter().map(cut).collect(),
            p_buy: cut(&self.p_buy),
            p_sell: cut(&self.p_sell),
            ambient: cut(&self.ambient),
        }
    }

    /// Keeps only the listed demand profiles, in the given order.
    pub fn with_profiles(&self, indices: &[usize]) -> ExogenousBundle {
        ExogenousBundle {
            profile_ids: indices.iter().map(|&i| self.profile_ids[i].clone()).collect(),
            demand: indices.iter().map(|&i| self.demand[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn profile_index(&self, id: &str) -> Option<usize> {
        self.profile_ids.iter().position(|p| p == id)
    }
}

const MONTH_DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Adds `hours` to `start` on a calendar without February 29.
pub fn advance_hours(start: NaiveDateTime, hours: usize) -> NaiveDateTime {
    let base = start.year() as i64 * HOURS_PER_YEAR as i64
        + (seconds_into_year(start) / 3600.0) as i64
        + hours as i64;
    let year = base.div_euclid(HOURS_PER_YEAR as i64) as i32;
    let hour_of_year = base.rem_euclid(HOURS_PER_YEAR as i64) as u32;
    let mut day = hour_of_year / 24;
    let mut month = 0;
    while day >= MONTH_DAYS[month] {
        day -= MONTH_DAYS[month];
        month += 1;
    }
    NaiveDate::from_ymd_opt(year, month as u32 + 1, day + 1)
        .and_then(|d| d.and_hms_opt(hour_of_year % 24, start.minute(), start.second()))
        .expect("valid calendar date")
}

/// Seconds since January 1st 00:00 on a calendar without February 29.
pub fn seconds_into_year(t: NaiveDateTime) -> f64 {
    let year_start = NaiveDate::from_ymd_opt(t.year(), 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid year");
    let mut secs = (t - year_start).num_seconds() as f64;
    let leap = NaiveDate::from_ymd_opt(t.year(), 2, 29).is_some();
    if leap && t.month() > 2 {
        secs -= SECONDS_PER_DAY;
    }
    secs
}
