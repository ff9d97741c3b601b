//! Exogenous series: CSV ingestion, profile splits, synthetic data.
//!
//! A dataset directory holds `generation.csv`, `price_buy.csv`,
//! `price_sell.csv`, `ambient.csv`, one `profiles/<id>.csv` per demand
//! profile and a `manifest.csv` assigning every profile to a split.

pub mod profiles;
pub mod series;
pub mod synth;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use profiles::{split_profiles, ProfileSet, Split};
pub use series::{load_series, parse_series, save_series, series_to_csv, Quantity, Series, Unit};
pub use synth::{synth_bundle, SynthKnobs};

use crate::env::ExogenousBundle;
use crate::error::{Error, Result};

/// Multiplies buying and selling prices by `alpha`.
pub fn scale_prices(bundle: &ExogenousBundle, alpha: f64) -> Result<ExogenousBundle> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("price multiplier {alpha} must be positive")));
    }
    Ok(ExogenousBundle {
        p_buy: bundle.p_buy.iter().map(|p| p * alpha).collect(),
        p_sell: bundle.p_sell.iter().map(|p| p * alpha).collect(),
        ..bundle.clone()
    })
}

/// A bundle together with its profile split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub bundle: ExogenousBundle,
    pub profiles: ProfileSet,
}

impl Dataset {
    /// Bundle indices of the profiles in `split`.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        let ids = match split {
            Split::Training => &self.profiles.training,
            Split::Validation => &self.profiles.validation,
        };
        ids.iter().filter_map(|id| self.bundle.profile_index(id)).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let b = &self.bundle;
        fs::create_dir_all(dir.join("profiles"))?;
        let series = |quantity, values: &[f64]| Series {
            start: b.start,
            quantity,
            values: values.to_vec(),
        };
        save_series(&dir.join("generation.csv"), &series(Quantity::Power, &b.generation), Unit::W)?;
        save_series(&dir.join("price_buy.csv"), &series(Quantity::Price, &b.p_buy), Unit::EurPerKwh)?;
        save_series(&dir.join("price_sell.csv"), &series(Quantity::Price, &b.p_sell), Unit::EurPerKwh)?;
        save_series(&dir.join("ambient.csv"), &series(Quantity::Temperature, &b.ambient), Unit::Celsius)?;
        b.profile_ids.par_iter().zip(&b.demand).try_for_each(|(id, d)| {
            save_series(&dir.join("profiles").join(format!("{id}.csv")), &series(Quantity::Power, d), Unit::W)
        })?;
        self.profiles.save_manifest(&dir.join("manifest.csv"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let profiles = ProfileSet::load_manifest(&dir.join("manifest.csv"))?;
        let ids: Vec<String> = profiles.training.iter().chain(&profiles.validation).cloned().collect();
        let named = [
            ("generation.csv", Quantity::Power),
            ("price_buy.csv", Quantity::Price),
            ("price_sell.csv", Quantity::Price),
            ("ambient.csv", Quantity::Temperature),
        ];
        let mut fixed = named
            .par_iter()
            .map(|(f, q)| load_series(&dir.join(f), *q))
            .collect::<Result<Vec<_>>>()?;
        let demand = ids
            .par_iter()
            .map(|id| load_series(&dir.join("profiles").join(format!("{id}.csv")), Quantity::Power))
            .collect::<Result<Vec<_>>>()?;

        let start = fixed[0].start;
        let len = fixed[0].len();
        for (s, name) in fixed.iter().map(|s| (s, "")).chain(demand.iter().zip(&ids).map(|(s, id)| (s, id.as_str()))) {
            if s.start != start || s.len() != len {
                let what = if name.is_empty() { "series" } else { name };
                return Err(Error::config(format!(
                    "{what} in {} does not cover the same hours as generation.csv",
                    dir.display()
                )));
            }
        }
        let ambient = fixed.pop().unwrap().values;
        let p_sell = fixed.pop().unwrap().values;
        let p_buy = fixed.pop().unwrap().values;
        let generation = fixed.pop().unwrap().values;
        let bundle = ExogenousBundle {
            start,
            step_seconds: 3600.0,
            generation,
            profile_ids: ids,
            demand: demand.into_iter().map(|s| s.values).collect(),
            p_buy,
            p_sell,
            ambient,
        };
        bundle.validate()?;
        Ok(Self { bundle, profiles })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::HOURS_PER_YEAR;
    use crate::policy::periodic_mean;

    fn small() -> ExogenousBundle {
        synth_bundle(
            5,
            2,
            &SynthKnobs {
                n_profiles: 3,
                ..SynthKnobs::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn unit_multiplier_is_identity() {
        let b = small();
        assert_eq!(scale_prices(&b, 1.0).unwrap(), b);
    }

    #[test]
    fn scaling_touches_prices_only() {
        let mut b = small();
        b.p_buy[0] = 0.30;
        let s = scale_prices(&b, 2.0).unwrap();
        assert_eq!(s.p_buy[0], 0.60);
        assert_eq!(s.generation, b.generation);
        assert_eq!(s.demand, b.demand);
        assert_eq!(s.ambient, b.ambient);
        let tenth = scale_prices(&b, 0.1).unwrap();
        assert!(tenth.p_sell.iter().zip(&b.p_sell).all(|(x, y)| *x == y * 0.1));
    }

    #[test]
    fn non_positive_multiplier_fails() {
        assert!(matches!(scale_prices(&small(), 0.0), Err(Error::Domain(_))));
        assert!(matches!(scale_prices(&small(), -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn scaling_commutes_with_averaging() {
        let b = small();
        let a = periodic_mean(&scale_prices(&b, 1.5).unwrap().p_buy, HOURS_PER_YEAR);
        let c: Vec<f64> = periodic_mean(&b.p_buy, HOURS_PER_YEAR).iter().map(|p| p * 1.5).collect();
        assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs()));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = small();
        let profiles = split_profiles(&bundle.profile_ids, 1, 2).unwrap();
        // Reorder the bundle the way a load will see it: training first.
        let order: Vec<usize> = profiles
            .training
            .iter()
            .chain(&profiles.validation)
            .map(|id| bundle.profile_index(id).unwrap())
            .collect();
        let ds = Dataset {
            bundle: bundle.with_profiles(&order),
            profiles,
        };
        ds.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(dir.path()).unwrap(), ds);
    }
}
