//! Battery digital twin.
//!
//! The default model is a first-order Thevenin circuit (open-circuit voltage,
//! series resistance and one RC pair) coupled to a lumped thermal node and a
//! separable calendar + cycling capacity-fade law. A lossless constant-voltage
//! model is also provided for small scenarios that need an exact optimum.
//!
//! Units: powers in W, capacity in Ah, temperatures in °C, step lengths in
//! hours unless a name says otherwise. Current is positive when charging.

mod ideal;
mod model;
mod thevenin;

pub use ideal::IdealBattery;
pub use model::BatteryModel;
pub use thevenin::{
    aging_step, feasible_power_bounds, ocv, power_to_current, soc_power_bounds, step,
    terminal_voltage, thermal_step, AgingParams, BatteryParams,
};

use serde::{Deserialize, Serialize};

/// Tolerance on the SoC window after a feasible step.
pub const SOC_TOLERANCE: f64 = 1e-9;

/// Evolving state of the storage unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// State of charge, fraction of the current capacity.
    pub soc: f64,
    /// Internal temperature [°C].
    pub temp: f64,
    /// State of health, `capacity / nominal capacity`.
    pub soh: f64,
    /// Current usable capacity [Ah].
    pub capacity_ah: f64,
    /// Polarization voltage across the RC branch [V].
    pub v_rc: f64,
    /// Cumulative absolute charge moved [Ah].
    pub throughput_ah: f64,
}

impl BatteryState {
    pub fn new(nominal_capacity_ah: f64, soc: f64, temp: f64, soh: f64) -> Self {
        Self {
            soc,
            temp,
            soh,
            capacity_ah: soh * nominal_capacity_ah,
            v_rc: 0.0,
            throughput_ah: 0.0,
        }
    }
}

/// Closed interval of admissible battery power `[lo, hi]` in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    pub lo: f64,
    pub hi: f64,
}

impl PowerBounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && p <= self.hi
    }

    pub fn intersect(&self, other: &PowerBounds) -> PowerBounds {
        PowerBounds::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Widens the interval so that it contains zero. SoC can sit a hair
    /// outside its window after a discharge through a resistive path, which
    /// would otherwise produce an interval excluding the idle action.
    pub(crate) fn containing_zero(self) -> PowerBounds {
        PowerBounds::new(self.lo.min(0.0), self.hi.max(0.0))
    }
}
