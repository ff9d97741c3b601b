use serde::{Deserialize, Serialize};

use super::{BatteryState, PowerBounds};
use crate::error::{Error, Result};

/// Lossless storage at constant terminal voltage.
///
/// Current is `p / voltage`, the cell temperature follows ambient, and the
/// SoH fades linearly in throughput (`k_cyc`) and time (`k_cal`). Used by the
/// dynamic-programming oracle, whose value function is exact for this model
/// when SoC transitions land on its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealBattery {
    pub capacity_ah: f64,
    pub voltage: f64,
    pub p_ch: f64,
    pub p_dch: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soh_eol: f64,
    /// SoH lost per nominal capacity of throughput.
    pub k_cyc: f64,
    /// SoH lost per hour.
    pub k_cal: f64,
}

impl IdealBattery {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_ah > 0.0 && self.voltage > 0.0) {
            return Err(Error::config("ideal battery needs positive capacity and voltage"));
        }
        if !(self.p_dch < 0.0 && 0.0 < self.p_ch) {
            return Err(Error::config("power limits must satisfy p_dch < 0 < p_ch"));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(Error::config("soc window must satisfy 0 <= soc_min < soc_max <= 1"));
        }
        if !(self.soh_eol > 0.0 && self.soh_eol < 1.0) {
            return Err(Error::config("soh_eol must lie in (0, 1)"));
        }
        if self.k_cyc < 0.0 || self.k_cal < 0.0 {
            return Err(Error::config("aging rates must be non-negative"));
        }
        Ok(())
    }

    /// Energy content at full charge and full health [Wh].
    pub fn energy_wh(&self) -> f64 {
        self.capacity_ah * self.voltage
    }

    pub fn soc_power_bounds(&self, state: &BatteryState, dt_h: f64) -> PowerBounds {
        let scale = state.capacity_ah * self.voltage / dt_h;
        PowerBounds::new((self.soc_min - state.soc) * scale, (self.soc_max - state.soc) * scale)
    }

    pub fn feasible_power_bounds(&self, state: &BatteryState, dt_h: f64) -> PowerBounds {
        PowerBounds::new(self.p_dch, self.p_ch)
            .intersect(&self.soc_power_bounds(state, dt_h))
            .containing_zero()
    }

    /// SoH change caused by moving `current` for `dt_h` hours.
    pub fn aging_step(&self, current: f64, dt_h: f64) -> f64 {
        -((self.k_cyc * current.abs() / self.capacity_ah + self.k_cal) * dt_h)
    }

    pub fn step(&self, state: &BatteryState, ambient: f64, p_b: f64, dt_h: f64) -> (BatteryState, f64) {
        let current = p_b / self.voltage;
        let soh = (state.soh + self.aging_step(current, dt_h)).max(0.0);
        let next = BatteryState {
            soc: state.soc + current * dt_h / state.capacity_ah,
            temp: ambient,
            soh,
            capacity_ah: soh * self.capacity_ah,
            v_rc: 0.0,
            throughput_ah: state.throughput_ah + current.abs() * dt_h,
        };
        (next, current)
    }
}
