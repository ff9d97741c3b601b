//! Synthetic household microgrid year(s): PV generation, demand profiles,
//! prices and ambient temperature.

use std::f64::consts::PI;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{ExogenousBundle, HOURS_PER_YEAR};
use crate::error::{Error, Result};

/// Generator settings. Powers in W, energies in MWh, prices in €/kWh,
/// temperatures in °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthKnobs {
    pub start_year: i32,
    pub n_profiles: usize,
    pub pv_peak_w: f64,
    /// Depth of daily cloud cover, in [0, 1).
    pub cloudiness: f64,
    pub demand_min_mwh: f64,
    pub demand_max_mwh: f64,
    /// Std of the multiplicative hourly demand noise.
    pub demand_noise: f64,
    pub price_mean: f64,
    /// Std of the multiplicative hourly price noise.
    pub price_noise: f64,
    /// Std of the year-to-year price level.
    pub price_year_spread: f64,
    /// Selling price as a fraction of the buying price.
    pub sell_ratio: f64,
    pub temp_mean: f64,
    pub temp_seasonal_amp: f64,
    pub temp_daily_amp: f64,
    pub temp_noise: f64,
}

impl Default for SynthKnobs {
    fn default() -> Self {
        Self {
            start_year: 2015,
            n_profiles: 48,
            pv_peak_w: 3000.0,
            cloudiness: 0.4,
            demand_min_mwh: 1.5,
            demand_max_mwh: 5.05,
            demand_noise: 0.2,
            price_mean: 0.25,
            price_noise: 0.08,
            price_year_spread: 0.1,
            sell_ratio: 0.4,
            temp_mean: 16.0,
            temp_seasonal_amp: 9.0,
            temp_daily_amp: 4.0,
            temp_noise: 1.5,
        }
    }
}

impl SynthKnobs {
    pub fn validate(&self) -> Result<()> {
        if self.n_profiles == 0 {
            return Err(Error::config("need at least one demand profile"));
        }
        if !(self.pv_peak_w >= 0.0) {
            return Err(Error::config("PV peak must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.cloudiness) {
            return Err(Error::config("cloudiness must lie in [0, 1)"));
        }
        if !(self.demand_min_mwh > 0.0 && self.demand_min_mwh <= self.demand_max_mwh) {
            return Err(Error::config("demand range must be positive and ordered"));
        }
        if !(self.price_mean > 0.0) {
            return Err(Error::config("mean price must be positive"));
        }
        if !(self.sell_ratio > 0.0 && self.sell_ratio < 1.0) {
            return Err(Error::config("sell ratio must lie in (0, 1)"));
        }
        let spreads = [self.demand_noise, self.price_noise, self.price_year_spread, self.temp_noise];
        if spreads.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::config("noise levels must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Daylight length in hours on day-of-year `d`, shortest near the winter
/// solstice.
fn day_length(d: usize) -> f64 {
    12.0 - 3.5 * (2.0 * PI * (d as f64 + 10.0) / 365.0).cos()
}

/// Seasonal position in [0, 1]: 0 in midwinter, 1 in midsummer.
fn summerness(d: usize) -> f64 {
    0.5 - 0.5 * (2.0 * PI * (d as f64 + 10.0) / 365.0).cos()
}

/// Clear-sky PV output in [0, 1] at hour `h` (0..24) of day `d`.
fn clear_sky(d: usize, h: f64) -> f64 {
    let len = day_length(d);
    let sunrise = 12.5 - len / 2.0;
    let x = (h - sunrise) / len;
    if (0.0..=1.0).contains(&x) {
        (PI * x).sin()
    } else {
        0.0
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn generation(knobs: &SynthKnobs, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 1);
    let mut cloud = 1.0;
    (0..n)
        .map(|k| {
            let (d, h) = ((k / 24) % 365, k % 24);
            if h == 0 {
                cloud = 1.0 - knobs.cloudiness * rng.gen::<f64>().powf(0.7);
            }
            let amp = knobs.pv_peak_w * (0.45 + 0.45 * summerness(d));
            let jitter = (1.0 + 0.05 * gauss(&mut rng)).max(0.0);
            (amp * clear_sky(d, h as f64 + 0.5) * cloud * jitter).min(knobs.pv_peak_w)
        })
        .collect()
}

fn bump(h: f64, center: f64, width: f64) -> f64 {
    let z = (h - center) / width;
    (-0.5 * z * z).exp()
}

fn demand_profile(knobs: &SynthKnobs, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = rng.gen_range(0.4..0.9);
    let morning = rng.gen_range(0.3..1.0);
    let evening = rng.gen_range(0.8..2.0);
    let shift = rng.gen_range(-1.0..1.0);
    let weekend = rng.gen_range(1.0..1.3);
    let winter_boost = rng.gen_range(0.0..0.3);
    let annual = rng.gen_range(knobs.demand_min_mwh..=knobs.demand_max_mwh);
    let noise = Normal::new(0.0, knobs.demand_noise).expect("validated std");

    let mut out = Vec::with_capacity(n);
    for year in 0..n.div_ceil(HOURS_PER_YEAR) {
        let len = HOURS_PER_YEAR.min(n - year * HOURS_PER_YEAR);
        let mut shape: Vec<f64> = (0..len)
            .map(|i| {
                let (d, h) = (i / 24, (i % 24) as f64 + 0.5);
                let weekly = if (d + year) % 7 >= 5 { weekend } else { 1.0 };
                let season = 1.0 + winter_boost * (1.0 - summerness(d));
                let daily = base + morning * bump(h, 7.5 + shift, 1.2) + evening * bump(h, 19.5 + shift, 2.0);
                (daily * weekly * season * (noise.sample(rng) as f64).exp()).max(0.0)
            })
            .collect();
        // Yearly totals wander a little around the profile's level but stay
        // inside the configured range.
        let target_mwh =
            (annual * (1.0 + 0.04 * gauss(rng))).clamp(knobs.demand_min_mwh, knobs.demand_max_mwh);
        let full_year_sum: f64 = shape.iter().sum::<f64>() * HOURS_PER_YEAR as f64 / len as f64;
        let scale = target_mwh * 1e6 / full_year_sum;
        shape.iter_mut().for_each(|v| *v *= scale);
        out.extend(shape);
    }
    out
}

fn prices(knobs: &SynthKnobs, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(seed, 2);
    let shape = |h: f64| 0.8 + 0.3 * bump(h, 9.0, 2.0) + 0.45 * bump(h, 19.5, 2.0) - 0.15 * bump(h, 3.5, 2.0);
    let daily_mean = (0..24).map(|h| shape(h as f64 + 0.5)).sum::<f64>() / 24.0;
    let mut year_level = 1.0;
    let mut day_level = 1.0;
    let buy: Vec<f64> = (0..n)
        .map(|k| {
            if k % HOURS_PER_YEAR == 0 {
                year_level = (1.0 + knobs.price_year_spread * gauss(&mut rng)).max(0.5);
            }
            if k % 24 == 0 {
                day_level = (1.0 + 0.05 * gauss(&mut rng)).max(0.7);
            }
            let h = (k % 24) as f64 + 0.5;
            let hourly = (1.0 + knobs.price_noise * gauss(&mut rng)).max(0.3);
            knobs.price_mean * year_level * day_level * hourly * shape(h) / daily_mean
        })
        .collect();
    let sell = buy.iter().map(|p| p * knobs.sell_ratio).collect();
    (buy, sell)
}

fn ambient(knobs: &SynthKnobs, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 3);
    let mut ar = 0.0;
    (0..n)
        .map(|k| {
            let (d, h) = ((k / 24) % 365, (k % 24) as f64 + 0.5);
            ar = 0.97 * ar + knobs.temp_noise * (1.0 - 0.97f64 * 0.97).sqrt() * gauss(&mut rng);
            knobs.temp_mean - knobs.temp_seasonal_amp * (2.0 * PI * (d as f64 + 10.0) / 365.0).cos()
                + knobs.temp_daily_amp * (2.0 * PI * (h - 15.0) / 24.0).cos()
                + ar
        })
        .collect()
}

/// Builds `years` no-leap years of hourly data starting on January 1 of
/// `knobs.start_year`.
pub fn synth_bundle(seed: u64, years: usize, knobs: &SynthKnobs) -> Result<ExogenousBundle> {
    if years == 0 {
        return Err(Error::config("at least one year is required"));
    }
    knobs.validate()?;
    let n = years * HOURS_PER_YEAR;
    let start = NaiveDate::from_ymd_opt(knobs.start_year, 1, 1)
        .ok_or_else(|| Error::config(format!("invalid start year {}", knobs.start_year)))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists");
    let mut profile_rng = rng_for(seed, 4);
    let demand = (0..knobs.n_profiles)
        .map(|_| demand_profile(knobs, n, &mut profile_rng))
        .collect();
    let (p_buy, p_sell) = prices(knobs, n, seed);
    let bundle = ExogenousBundle {
        start,
        step_seconds: 3600.0,
        generation: generation(knobs, n, seed),
        profile_ids: (0..knobs.n_profiles).map(|i| format!("h{i:03}")).collect(),
        demand,
        p_buy,
        p_sell,
        ambient: ambient(knobs, n, seed),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn year() -> ExogenousBundle {
        synth_bundle(
            11,
            1,
            &SynthKnobs {
                n_profiles: 6,
                ..SynthKnobs::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn night_has_no_generation() {
        let b = year();
        for d in 0..365 {
            assert_eq!(b.generation[d * 24 + 2], 0.0);
            assert_eq!(b.generation[d * 24 + 23], 0.0);
        }
        assert!(b.generation.iter().cloned().fold(0.0, f64::max) <= 3000.0);
        assert!(b.generation.iter().any(|&g| g > 1500.0));
    }

    #[test]
    fn selling_below_buying() {
        let b = year();
        assert!(b.p_buy.iter().zip(&b.p_sell).all(|(buy, sell)| sell < buy && *sell > 0.0));
    }

    #[test]
    fn yearly_demand_in_range() {
        let b = synth_bundle(
            2,
            3,
            &SynthKnobs {
                n_profiles: 10,
                ..SynthKnobs::default()
            },
        )
        .unwrap();
        for d in &b.demand {
            for y in 0..3 {
                let mwh: f64 = d[y * HOURS_PER_YEAR..(y + 1) * HOURS_PER_YEAR].iter().sum::<f64>() / 1e6;
                assert!((1.5 - 1e-9..=5.05 + 1e-9).contains(&mwh), "{mwh}");
            }
        }
    }

    #[test]
    fn seed_determinism() {
        assert_eq!(year(), year());
        let other = synth_bundle(12, 1, &SynthKnobs { n_profiles: 6, ..SynthKnobs::default() }).unwrap();
        assert_ne!(year().generation, other.generation);
    }

    #[test]
    fn zero_years_rejected() {
        assert!(synth_bundle(1, 0, &SynthKnobs::default()).is_err());
    }
}
