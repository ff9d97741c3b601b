//! Backward-induction optimum of a small deterministic dispatch problem.

use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::battery::{BatteryModel, BatteryState, IdealBattery};
use crate::env::{ExogenousBundle, InitRule, MdpConfig};
use crate::error::{Error, Result};
use crate::microgrid::{self, PriceQuote};

/// Deterministic single-profile scenario on a lossless battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyScenario {
    pub generation: Vec<f64>,
    pub demand: Vec<f64>,
    pub p_buy: Vec<f64>,
    pub p_sell: Vec<f64>,
    pub battery: IdealBattery,
    pub initial_soc: f64,
    pub replacement_cost: f64,
    pub ambient: f64,
}

/// Discretisation of the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpGrid {
    pub soc_levels: usize,
    pub action_levels: usize,
}

impl Default for DpGrid {
    fn default() -> Self {
        Self {
            soc_levels: 51,
            action_levels: 21,
        }
    }
}

impl ToyScenario {
    /// Two days of a 12-hour cycle of 2-hour blocks in which the best move
    /// depends on the hour: store cheap surplus, buy during cheap deficits,
    /// discharge into the price peak, sell into the high feed-in window.
    ///
    /// A 10 kWh pack at ±4 kW moves 0.4 SoC per full-power hour, so every
    /// action on a 21-level grid lands on a 51-level SoC grid.
    pub fn reference() -> Self {
        // (net power W, buy €/kWh, sell €/kWh) per 2-hour block.
        let blocks = [
            (4000.0, 0.10, 0.04),
            (-4000.0, 0.10, 0.04),
            (-4000.0, 0.90, 0.30),
            (4000.0, 0.70, 0.60),
            (4000.0, 0.10, 0.04),
            (-4000.0, 0.90, 0.30),
        ];
        let mut s = ToyScenario {
            generation: Vec::new(),
            demand: Vec::new(),
            p_buy: Vec::new(),
            p_sell: Vec::new(),
            battery: IdealBattery {
                capacity_ah: 25.0,
                voltage: 400.0,
                p_ch: 4000.0,
                p_dch: -4000.0,
                soc_min: 0.1,
                soc_max: 0.9,
                soh_eol: 0.8,
                k_cyc: 1e-5,
                k_cal: 0.0,
            },
            initial_soc: 0.5,
            replacement_cost: 3000.0,
            ambient: 25.0,
        };
        for k in 0..48 {
            let (p_n, buy, sell) = blocks[(k / 2) % blocks.len()];
            let (generation, demand) = if p_n > 0.0 { (p_n + 1000.0, 1000.0) } else { (0.0, -p_n) };
            s.generation.push(generation);
            s.demand.push(demand);
            s.p_buy.push(buy);
            s.p_sell.push(sell);
        }
        s
    }

    pub fn horizon(&self) -> usize {
        self.generation.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.horizon();
        if n == 0 {
            return Err(Error::config("scenario has no steps"));
        }
        if [self.demand.len(), self.p_buy.len(), self.p_sell.len()].iter().any(|&l| l != n) {
            return Err(Error::config("scenario series differ in length"));
        }
        self.battery.validate()
    }

    /// The scenario as a one-profile bundle with hourly steps.
    pub fn bundle(&self) -> ExogenousBundle {
        ExogenousBundle {
            start: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            step_seconds: 3600.0,
            generation: self.generation.clone(),
            profile_ids: vec!["toy".into()],
            demand: vec![self.demand.clone()],
            p_buy: self.p_buy.clone(),
            p_sell: self.p_sell.clone(),
            ambient: vec![self.ambient; self.horizon()],
        }
    }

    pub fn shared_bundle(&self) -> Arc<ExogenousBundle> {
        Arc::new(self.bundle())
    }

    pub fn model(&self) -> BatteryModel {
        BatteryModel::Ideal(self.battery.clone())
    }

    /// Environment settings matching the oracle: whole-scenario episodes
    /// from a fixed SoC, no clipping penalty.
    pub fn mdp(&self) -> MdpConfig {
        MdpConfig {
            horizon: self.horizon(),
            lambda: 0.0,
            initial_soc: self.initial_soc,
            initial_soh: 1.0,
            replacement_cost: self.replacement_cost,
            init: InitRule::Fixed,
            ..MdpConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub grid: DpGrid,
    /// Optimal `Σ (r_trad + r_deg)` from the initial SoC.
    pub optimum: f64,
    /// `values[t][j]`: optimal return-to-go at step `t` from SoC level `j`.
    pub values: Vec<Vec<f64>>,
    /// `actions[t][j]`: a maximising action.
    pub actions: Vec<Vec<f64>>,
}

fn soc_level(grid: &DpGrid, j: usize) -> f64 {
    j as f64 / (grid.soc_levels - 1) as f64
}

fn on_grid(x: f64, levels: usize) -> bool {
    let pos = x * (levels - 1) as f64;
    (pos - pos.round()).abs() < 1e-9
}

/// Linear interpolation of `row` over the SoC grid.
fn interpolate(row: &[f64], soc: f64) -> f64 {
    let pos = soc.clamp(0.0, 1.0) * (row.len() - 1) as f64;
    let lo = (pos.floor() as usize).min(row.len() - 2);
    let w = pos - lo as f64;
    if w.abs() < 1e-9 {
        return row[lo];
    }
    if (1.0 - w).abs() < 1e-9 {
        return row[lo + 1];
    }
    row[lo] * (1.0 - w) + row[lo + 1] * w
}

/// One step of the oracle's dynamics. Capacity fade within the horizon is
/// ignored, so the state is the SoC alone.
fn transition(s: &ToyScenario, k: usize, soc: f64, a: f64) -> Result<(f64, f64)> {
    let b = &s.battery;
    let state = BatteryState::new(b.capacity_ah, soc, s.ambient, 1.0);
    let p_n = microgrid::net_power(s.generation[k], s.demand[k])?;
    let d = microgrid::dispatch(a, p_n, b.feasible_power_bounds(&state, 1.0))?;
    let (next, _) = b.step(&state, s.ambient, d.p_b, 1.0);
    // The oracle accepts degenerate prices (such as all zero) that the
    // environment would reject.
    let quote = PriceQuote {
        p_buy: s.p_buy[k],
        p_sell: s.p_sell[k],
    };
    let r = microgrid::reward_trading(d.p_e, &quote, 1.0)
        + microgrid::reward_degradation(1.0, next.soh, b.soh_eol, s.replacement_cost)?;
    Ok((next.soc, r))
}

/// Exact optimum of the discretised problem by backward induction.
pub fn dp_oracle(s: &ToyScenario, grid: DpGrid) -> Result<DpSolution> {
    s.validate()?;
    if grid.soc_levels < 2 || grid.action_levels < 2 {
        return Err(Error::config("grids need at least two levels"));
    }
    let b = &s.battery;
    if !on_grid(b.soc_min, grid.soc_levels) || !on_grid(b.soc_max, grid.soc_levels) {
        return Err(Error::config(format!(
            "{} SoC levels cannot represent the window [{}, {}]",
            grid.soc_levels, b.soc_min, b.soc_max
        )));
    }
    let n = s.horizon();
    let actions: Vec<f64> = (0..grid.action_levels)
        .map(|i| i as f64 / (grid.action_levels - 1) as f64)
        .collect();
    let mut values = vec![vec![0.0; grid.soc_levels]; n + 1];
    let mut policy = vec![vec![0.0; grid.soc_levels]; n];
    for k in (0..n).rev() {
        for j in 0..grid.soc_levels {
            let soc = soc_level(&grid, j).clamp(b.soc_min, b.soc_max);
            let mut best = (f64::NEG_INFINITY, 0.0);
            for &a in &actions {
                let (next, r) = transition(s, k, soc, a)?;
                let q = r + interpolate(&values[k + 1], next);
                if q > best.0 + 1e-12 {
                    best = (q, a);
                }
            }
            values[k][j] = best.0;
            policy[k][j] = best.1;
        }
    }
    let optimum = interpolate(&values[0], s.initial_soc);
    Ok(DpSolution {
        grid,
        optimum,
        values,
        actions: policy,
    })
}

impl DpSolution {
    /// Maximising action at step `k` for the nearest SoC level.
    pub fn action(&self, k: usize, soc: f64) -> f64 {
        let j = (soc.clamp(0.0, 1.0) * (self.grid.soc_levels - 1) as f64).round() as usize;
        self.actions[k][j]
    }
}

/// Economic return of an open-loop action sequence under the oracle's
/// dynamics.
pub fn sequence_return(s: &ToyScenario, actions: &[f64]) -> Result<f64> {
    let mut soc = s.initial_soc;
    let mut total = 0.0;
    for (k, &a) in actions.iter().enumerate() {
        let (next, r) = transition(s, k, soc, a)?;
        soc = next;
        total += r;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> ToyScenario {
        ToyScenario {
            generation: vec![9000.0, 0.0],
            demand: vec![1000.0, 8000.0],
            p_buy: vec![0.2, 1.0],
            p_sell: vec![0.1, 0.5],
            battery: IdealBattery {
                capacity_ah: 25.0,
                voltage: 400.0,
                p_ch: 8000.0,
                p_dch: -8000.0,
                soc_min: 0.1,
                soc_max: 0.9,
                soh_eol: 0.8,
                k_cyc: 0.0,
                k_cal: 0.0,
            },
            initial_soc: 0.1,
            replacement_cost: 3000.0,
            ambient: 25.0,
        }
    }

    #[test]
    fn zero_prices_and_aging_give_zero() {
        let mut s = two_step();
        s.p_buy = vec![0.0, 0.0];
        s.p_sell = vec![0.0, 0.0];
        let sol = dp_oracle(&s, DpGrid::default()).unwrap();
        assert_eq!(sol.optimum, 0.0);
        assert!(sol.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn charge_then_discharge() {
        let s = two_step();
        let sol = dp_oracle(&s, DpGrid::default()).unwrap();
        // Storing all 8 kWh of surplus and covering the 8 kWh deficit from
        // the battery leaves nothing to trade.
        assert!(sol.optimum.abs() < 1e-12, "{}", sol.optimum);
        assert_eq!(sol.action(0, 0.1), 1.0);
        let mut brute = f64::NEG_INFINITY;
        for i in 0..21 {
            for j in 0..21 {
                let r = sequence_return(&s, &[i as f64 / 20.0, j as f64 / 20.0]).unwrap();
                brute = brute.max(r);
            }
        }
        assert!((brute - sol.optimum).abs() < 1e-12);
    }

    #[test]
    fn refinement_is_stable() {
        let s = ToyScenario::reference();
        let coarse = dp_oracle(&s, DpGrid::default()).unwrap().optimum;
        let fine = dp_oracle(
            &s,
            DpGrid {
                soc_levels: 101,
                action_levels: 21,
            },
        )
        .unwrap()
        .optimum;
        assert!((coarse - fine).abs() <= 0.01 * coarse.abs());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = DpGrid {
            soc_levels: 4,
            action_levels: 21,
        };
        assert!(matches!(dp_oracle(&two_step(), grid), Err(Error::Config(_))));
    }

    #[test]
    fn reference_optimum_is_positive() {
        let sol = dp_oracle(&ToyScenario::reference(), DpGrid::default()).unwrap();
        assert!(sol.optimum > 0.0, "{}", sol.optimum);
    }
}
