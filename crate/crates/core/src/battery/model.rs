use serde::{Deserialize, Serialize};

use super::{thevenin, BatteryParams, BatteryState, IdealBattery, PowerBounds};
use crate::error::Result;

/// Storage model driven by the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatteryModel {
    Thevenin(BatteryParams),
    Ideal(IdealBattery),
}

impl Default for BatteryModel {
    fn default() -> Self {
        BatteryModel::Thevenin(BatteryParams::default())
    }
}

impl BatteryModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            BatteryModel::Thevenin(p) => p.validate(),
            BatteryModel::Ideal(p) => p.validate(),
        }
    }

    pub fn nominal_capacity_ah(&self) -> f64 {
        match self {
            BatteryModel::Thevenin(p) => p.nominal_capacity_ah,
            BatteryModel::Ideal(p) => p.capacity_ah,
        }
    }

    pub fn soc_window(&self) -> (f64, f64) {
        match self {
            BatteryModel::Thevenin(p) => (p.soc_min, p.soc_max),
            BatteryModel::Ideal(p) => (p.soc_min, p.soc_max),
        }
    }

    pub fn soh_eol(&self) -> f64 {
        match self {
            BatteryModel::Thevenin(p) => p.soh_eol,
            BatteryModel::Ideal(p) => p.soh_eol,
        }
    }

    pub fn initial_state(&self, soc: f64, temp: f64, soh: f64) -> BatteryState {
        BatteryState::new(self.nominal_capacity_ah(), soc, temp, soh)
    }

    /// Voltage entering the SoC-headroom constraint.
    pub fn terminal_voltage(&self, state: &BatteryState) -> f64 {
        match self {
            BatteryModel::Thevenin(p) => thevenin::terminal_voltage(state, p),
            BatteryModel::Ideal(p) => p.voltage,
        }
    }

    pub fn soc_power_bounds(&self, state: &BatteryState, dt_h: f64) -> PowerBounds {
        match self {
            BatteryModel::Thevenin(p) => thevenin::soc_power_bounds(state, p, dt_h),
            BatteryModel::Ideal(p) => p.soc_power_bounds(state, dt_h),
        }
    }

    pub fn feasible_power_bounds(&self, state: &BatteryState, dt_h: f64) -> PowerBounds {
        match self {
            BatteryModel::Thevenin(p) => thevenin::feasible_power_bounds(state, p, dt_h),
            BatteryModel::Ideal(p) => p.feasible_power_bounds(state, dt_h),
        }
    }

    pub fn step(&self, state: &BatteryState, ambient: f64, p_b: f64, dt_h: f64) -> Result<(BatteryState, f64)> {
        match self {
            BatteryModel::Thevenin(p) => thevenin::step(state, p, ambient, p_b, dt_h),
            BatteryModel::Ideal(p) => Ok(p.step(state, ambient, p_b, dt_h)),
        }
    }

    /// Same model with every fade mechanism switched off.
    pub fn without_aging(&self) -> BatteryModel {
        match self {
            BatteryModel::Thevenin(p) => {
                let mut p = p.clone();
                p.aging.k_cal = 0.0;
                p.aging.k_cyc = 0.0;
                BatteryModel::Thevenin(p)
            }
            BatteryModel::Ideal(p) => BatteryModel::Ideal(IdealBattery {
                k_cyc: 0.0,
                k_cal: 0.0,
                ..p.clone()
            }),
        }
    }

    /// Same model with calendar fade switched off.
    pub fn without_calendar_aging(&self) -> BatteryModel {
        match self {
            BatteryModel::Thevenin(p) => {
                let mut p = p.clone();
                p.aging.k_cal = 0.0;
                BatteryModel::Thevenin(p)
            }
            BatteryModel::Ideal(p) => BatteryModel::Ideal(IdealBattery { k_cal: 0.0, ..p.clone() }),
        }
    }
}
