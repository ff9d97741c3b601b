//! Controllers and the training-condition transforms of the RL baselines.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::env::{ExogenousBundle, Observation, HOURS_PER_YEAR};
use crate::error::{Error, Result};

/// A controller mapping observations to the battery share `a ∈ [0, 1]`.
pub trait Policy: Send + Sync {
    fn act(&self, obs: &Observation) -> f64;

    /// Exploratory action; deterministic policies ignore the generator.
    fn act_stochastic(&self, obs: &Observation, _rng: &mut dyn RngCore) -> f64 {
        self.act(obs)
    }
}

/// Sends a fixed share of net power to the battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy {
    share: f64,
}

impl ConstantPolicy {
    pub fn share(&self) -> f64 {
        self.share
    }
}

impl Policy for ConstantPolicy {
    fn act(&self, _obs: &Observation) -> f64 {
        self.share
    }
}

/// X-Y rule: `x` percent of net power to the battery, the rest to the grid.
pub fn xy_policy(x: f64) -> Result<ConstantPolicy> {
    if !(0.0..=100.0).contains(&x) {
        return Err(Error::domain(format!("battery percentage {x} outside [0, 100]")));
    }
    Ok(ConstantPolicy { share: x / 100.0 })
}

/// 0-100: never touches the battery.
pub fn only_grid() -> ConstantPolicy {
    ConstantPolicy { share: 0.0 }
}

/// 100-0: battery first, grid for whatever the battery cannot take.
pub fn battery_first() -> ConstantPolicy {
    ConstantPolicy { share: 1.0 }
}

impl<F> Policy for F
where
    F: Fn(&Observation) -> f64 + Send + Sync,
{
    fn act(&self, obs: &Observation) -> f64 {
        self(obs).clamp(0.0, 1.0)
    }
}

/// Information available to a learner during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingCondition {
    /// True exogenous series.
    Full,
    /// Fixed ambient temperature and prices averaged over training years.
    FixedTemperatureAveragedPrices,
    /// Fixed ambient temperature, true prices.
    FixedTemperature,
}

/// Evaluated method, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// X-Y rule with the battery percentage `x`.
    Rule(u32),
    Rl,
    RlBase,
    RlBasePlus,
}

impl Method {
    /// The eight methods of the reference campaign.
    pub fn roster() -> Vec<Method> {
        vec![
            Method::Rule(20),
            Method::Rule(50),
            Method::Rule(80),
            Method::Rule(0),
            Method::Rule(100),
            Method::Rl,
            Method::RlBase,
            Method::RlBasePlus,
        ]
    }

    pub fn rule_based() -> Vec<Method> {
        Self::roster().into_iter().filter(|m| !m.is_learned()).collect()
    }

    pub fn is_learned(&self) -> bool {
        !matches!(self, Method::Rule(_))
    }

    pub fn training_condition(&self) -> Option<TrainingCondition> {
        match self {
            Method::Rule(_) => None,
            Method::Rl => Some(TrainingCondition::Full),
            Method::RlBase => Some(TrainingCondition::FixedTemperatureAveragedPrices),
            Method::RlBasePlus => Some(TrainingCondition::FixedTemperature),
        }
    }

    /// Constant policy for rule-based methods.
    pub fn rule_policy(&self) -> Option<ConstantPolicy> {
        match self {
            Method::Rule(x) => Some(ConstantPolicy {
                share: *x as f64 / 100.0,
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Rule(0) => write!(f, "og"),
            Method::Rule(100) => write!(f, "bf"),
            Method::Rule(x) => write!(f, "{}-{}", x, 100 - x),
            Method::Rl => write!(f, "rl"),
            Method::RlBase => write!(f, "rl-base"),
            Method::RlBasePlus => write!(f, "rl-base-plus"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "og" | "only-grid" => return Ok(Method::Rule(0)),
            "bf" | "battery-first" => return Ok(Method::Rule(100)),
            "rl" => return Ok(Method::Rl),
            "rl-base" => return Ok(Method::RlBase),
            "rl-base-plus" | "rl-base+" => return Ok(Method::RlBasePlus),
            _ => {}
        }
        let parsed = s
            .split_once('-')
            .and_then(|(x, y)| Some((x.parse::<u32>().ok()?, y.parse::<u32>().ok()?)));
        match parsed {
            Some((x, y)) if x + y == 100 => Ok(Method::Rule(x)),
            _ => Err(Error::config(format!("unknown method '{s}'"))),
        }
    }
}

/// Bundle seen by a learner trained under `condition`.
pub fn training_bundle(bundle: &ExogenousBundle, condition: TrainingCondition, fixed_temp: f64) -> ExogenousBundle {
    match condition {
        TrainingCondition::Full => bundle.clone(),
        TrainingCondition::FixedTemperatureAveragedPrices => rl_base_bundle(bundle, fixed_temp),
        TrainingCondition::FixedTemperature => rl_base_plus_bundle(bundle, fixed_temp),
    }
}

/// Constant ambient temperature and hour-of-year averaged prices.
pub fn rl_base_bundle(bundle: &ExogenousBundle, fixed_temp: f64) -> ExogenousBundle {
    ExogenousBundle {
        p_buy: periodic_mean(&bundle.p_buy, HOURS_PER_YEAR),
        p_sell: periodic_mean(&bundle.p_sell, HOURS_PER_YEAR),
        ..rl_base_plus_bundle(bundle, fixed_temp)
    }
}

/// Constant ambient temperature, prices untouched.
pub fn rl_base_plus_bundle(bundle: &ExogenousBundle, fixed_temp: f64) -> ExogenousBundle {
    ExogenousBundle {
        ambient: vec![fixed_temp; bundle.len()],
        ..bundle.clone()
    }
}

/// Replaces every entry by the mean of all entries sharing its phase
/// modulo `period`.
pub fn periodic_mean(series: &[f64], period: usize) -> Vec<f64> {
    let mut sums = vec![0.0; period.min(series.len())];
    let mut counts = vec![0usize; sums.len()];
    for (k, v) in series.iter().enumerate() {
        sums[k % period] += v;
        counts[k % period] += 1;
    }
    (0..series.len())
        .map(|k| sums[k % period] / counts[k % period] as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn obs(seed: f64) -> Observation {
        Observation {
            soc: seed,
            temp: 2.0 * seed,
            demand_est: 3.0 * seed,
            generation_est: 4.0,
            p_buy: 0.3,
            p_sell: 0.1,
            cos_day: 1.0,
            sin_day: 0.0,
            cos_year: 0.0,
            sin_year: 1.0,
        }
    }

    #[test]
    fn xy_examples() {
        assert_eq!(xy_policy(50.0).unwrap().act(&obs(0.3)), 0.5);
        assert_eq!(xy_policy(0.0).unwrap(), only_grid());
        assert_eq!(xy_policy(100.0).unwrap(), battery_first());
        assert_eq!(battery_first().act(&obs(0.9)), 1.0);
        assert!(xy_policy(101.0).is_err());
        assert!(xy_policy(-1.0).is_err());
    }

    #[test]
    fn constant_policy_ignores_observation() {
        let p = xy_policy(20.0).unwrap();
        for s in [0.0, 0.2, 0.7, 1.0] {
            assert_eq!(p.act(&obs(s)), 0.2);
        }
    }

    #[test]
    fn method_names_round_trip() {
        let names = ["20-80", "50-50", "80-20", "og", "bf", "rl", "rl-base", "rl-base-plus"];
        let roster: Vec<String> = Method::roster().iter().map(|m| m.to_string()).collect();
        assert_eq!(roster, names);
        for n in names {
            assert_eq!(n.parse::<Method>().unwrap().to_string(), n);
        }
        assert_eq!("0-100".parse::<Method>().unwrap(), Method::Rule(0));
        assert!("60-60".parse::<Method>().is_err());
        assert!("ppo".parse::<Method>().is_err());
    }

    fn two_year_bundle(scale: f64) -> ExogenousBundle {
        let n = 2 * HOURS_PER_YEAR;
        let p_buy: Vec<f64> = (0..n)
            .map(|k| if k < HOURS_PER_YEAR { 0.2 } else { 0.6 } * scale)
            .collect();
        ExogenousBundle {
            start: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            step_seconds: 3600.0,
            generation: vec![0.0; n],
            profile_ids: vec!["p".into()],
            demand: vec![vec![100.0; n]],
            p_sell: p_buy.iter().map(|p| p * 0.5).collect(),
            p_buy,
            ambient: (0..n).map(|k| (k % 24) as f64).collect(),
        }
    }

    #[test]
    fn rl_base_averages_across_years() {
        let b = rl_base_bundle(&two_year_bundle(1.0), 25.0);
        assert!(b.ambient.iter().all(|&t| t == 25.0));
        assert!(b.p_buy.iter().all(|&p| (p - 0.4).abs() < 1e-15));
        assert!(b.p_sell.iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn rl_base_plus_keeps_prices() {
        let src = two_year_bundle(1.0);
        let b = rl_base_plus_bundle(&src, 25.0);
        assert_eq!(b.p_buy, src.p_buy);
        assert!(b.ambient.iter().all(|&t| t == 25.0));
    }

    #[test]
    fn constant_prices_are_unchanged_by_averaging() {
        let series = vec![0.25; 3 * HOURS_PER_YEAR];
        assert_eq!(periodic_mean(&series, HOURS_PER_YEAR), series);
    }
}
