use serde::{Deserialize, Serialize};

use super::{BatteryState, PowerBounds};
use crate::error::{Error, Result};

/// Coefficients of the capacity-fade law.
///
/// Per step of length `dt` hours the SoH changes by
/// `-(k_cal * g_T * g_soc + k_cyc * |i| * g_T / C_N) * dt` with
/// `g_T = exp(theta_t * (T - t_ref))` and
/// `g_soc = max(0, 1 + soc_stress_slope * (soc - 0.5))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgingParams {
    /// Calendar fade rate at the reference temperature [1/h].
    pub k_cal: f64,
    /// Cycling fade rate, SoH lost per nominal capacity of throughput.
    pub k_cyc: f64,
    /// Temperature sensitivity [1/K].
    pub theta_t: f64,
    /// Reference temperature [°C].
    pub t_ref: f64,
    pub soc_stress_slope: f64,
}

impl Default for AgingParams {
    fn default() -> Self {
        Self {
            k_cal: 2.3e-6,
            k_cyc: 1.6e-4,
            theta_t: std::f64::consts::LN_2 / 10.0,
            t_ref: 25.0,
            soc_stress_slope: 0.8,
        }
    }
}

impl AgingParams {
    pub fn disabled() -> Self {
        Self {
            k_cal: 0.0,
            k_cyc: 0.0,
            ..Self::default()
        }
    }
}

/// Parameters of the Thevenin pack model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Nominal charge capacity C_N [Ah].
    pub nominal_capacity_ah: f64,
    pub nominal_voltage: f64,
    pub energy_capacity_kwh: f64,
    /// Ordered `(soc, volts)` breakpoints, strictly increasing in both.
    pub ocv_table: Vec<(f64, f64)>,
    pub r0: f64,
    pub r1: f64,
    pub c1: f64,
    /// Thermal resistance to ambient [K/W].
    pub r_th: f64,
    /// Heat capacity [J/K].
    pub c_th: f64,
    /// Maximum charge power [W], positive.
    pub p_ch: f64,
    /// Maximum discharge power [W], negative.
    pub p_dch: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soh_eol: f64,
    pub aging: AgingParams,
}

impl Default for BatteryParams {
    /// 350 V / 21 kWh residential pack.
    fn default() -> Self {
        Self {
            nominal_capacity_ah: 21_000.0 / 350.0,
            nominal_voltage: 350.0,
            energy_capacity_kwh: 21.0,
            ocv_table: vec![
                (0.0, 300.0),
                (0.1, 330.0),
                (0.2, 339.0),
                (0.3, 344.0),
                (0.4, 348.0),
                (0.5, 352.0),
                (0.6, 357.0),
                (0.7, 364.0),
                (0.8, 373.0),
                (0.9, 385.0),
                (1.0, 400.0),
            ],
            r0: 0.1,
            r1: 0.02,
            c1: 5000.0,
            r_th: 0.2,
            c_th: 150_000.0,
            p_ch: 10_000.0,
            p_dch: -10_000.0,
            soc_min: 0.1,
            soc_max: 0.9,
            soh_eol: 0.8,
            aging: AgingParams::default(),
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        if self.ocv_table.len() < 2 {
            return Err(Error::config("ocv_table needs at least two breakpoints"));
        }
        let (first, last) = (self.ocv_table[0], self.ocv_table[self.ocv_table.len() - 1]);
        if first.0 != 0.0 || last.0 != 1.0 {
            return Err(Error::config("ocv_table must span soc 0 to 1"));
        }
        for w in self.ocv_table.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::config("ocv_table must be strictly increasing"));
            }
        }
        if self.ocv_table[0].1 <= 0.0 {
            return Err(Error::config("open-circuit voltage must be positive"));
        }
        let positive = [
            ("nominal_capacity_ah", self.nominal_capacity_ah),
            ("r0", self.r0),
            ("r1", self.r1),
            ("c1", self.c1),
            ("r_th", self.r_th),
            ("c_th", self.c_th),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
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
        let a = &self.aging;
        if a.k_cal < 0.0 || a.k_cyc < 0.0 || a.theta_t < 0.0 {
            return Err(Error::config("aging rates must be non-negative"));
        }
        Ok(())
    }
}

/// Open-circuit voltage by piecewise-linear interpolation of the table.
pub fn ocv(soc: f64, params: &BatteryParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&soc) {
        return Err(Error::domain(format!("soc {soc} outside [0, 1]")));
    }
    Ok(interpolate(&params.ocv_table, soc))
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let idx = table.partition_point(|&(s, _)| s <= x);
    if idx == 0 {
        return table[0].1;
    }
    if idx == table.len() {
        return table[table.len() - 1].1;
    }
    let (x0, y0) = table[idx - 1];
    let (x1, y1) = table[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// `ocv(soc) + v_rc`, the voltage used by the headroom constraint.
pub fn terminal_voltage(state: &BatteryState, params: &BatteryParams) -> f64 {
    interpolate(&params.ocv_table, state.soc.clamp(0.0, 1.0)) + state.v_rc
}

/// Current [A] drawing the requested terminal power.
///
/// Solves `p = (v + i * r0) * i` for the root of smaller magnitude, written in
/// the cancellation-free form `2p / (v + sqrt(v^2 + 4 r0 p))`.
pub fn power_to_current(state: &BatteryState, params: &BatteryParams, p_b: f64) -> Result<f64> {
    let v = terminal_voltage(state, params);
    let disc = v * v + 4.0 * params.r0 * p_b;
    if disc < 0.0 {
        return Err(Error::InfeasiblePower {
            requested_w: p_b,
            limit_w: -v * v / (4.0 * params.r0),
        });
    }
    Ok(2.0 * p_b / (v + disc.sqrt()))
}

/// Headroom constraint alone: powers keeping the SoC inside its window.
pub fn soc_power_bounds(state: &BatteryState, params: &BatteryParams, dt_h: f64) -> PowerBounds {
    let scale = state.capacity_ah * terminal_voltage(state, params) / dt_h;
    PowerBounds::new(
        (params.soc_min - state.soc) * scale,
        (params.soc_max - state.soc) * scale,
    )
}

/// Intersection of the power-rating and SoC-headroom constraints.
pub fn feasible_power_bounds(state: &BatteryState, params: &BatteryParams, dt_h: f64) -> PowerBounds {
    PowerBounds::new(params.p_dch, params.p_ch)
        .intersect(&soc_power_bounds(state, params, dt_h))
        .containing_zero()
}

/// Forward-Euler update of the lumped thermal node.
pub fn thermal_step(state: &BatteryState, params: &BatteryParams, ambient: f64, current: f64, dt_h: f64) -> f64 {
    let dt_s = dt_h * 3600.0;
    let heat = current * current * (params.r0 + params.r1);
    let loss = (state.temp - ambient) / params.r_th;
    state.temp + dt_s / params.c_th * (heat - loss)
}

/// SoH change over one step; never positive.
pub fn aging_step(state: &BatteryState, params: &BatteryParams, current: f64, dt_h: f64) -> f64 {
    let a = &params.aging;
    let g_t = (a.theta_t * (state.temp - a.t_ref)).exp();
    let g_soc = (1.0 + a.soc_stress_slope * (state.soc - 0.5)).max(0.0);
    let rate = a.k_cal * g_t * g_soc + a.k_cyc * current.abs() * g_t / params.nominal_capacity_ah;
    -(rate * dt_h).max(0.0)
}

/// Advances the twin by one step at terminal power `p_b`.
///
/// Returns the new state and the current that flowed. The caller is
/// expected to have clipped `p_b` to [`feasible_power_bounds`].
pub fn step(
    state: &BatteryState,
    params: &BatteryParams,
    ambient: f64,
    p_b: f64,
    dt_h: f64,
) -> Result<(BatteryState, f64)> {
    let current = power_to_current(state, params, p_b)?;
    let dt_s = dt_h * 3600.0;
    let decay = (-dt_s / (params.r1 * params.c1)).exp();

    let soc = state.soc + current * dt_h / state.capacity_ah;
    let v_rc = state.v_rc * decay + current * params.r1 * (1.0 - decay);
    let temp = thermal_step(state, params, ambient, current, dt_h);
    let soh = (state.soh + aging_step(state, params, current, dt_h)).max(0.0);

    let next = BatteryState {
        soc,
        temp,
        soh,
        capacity_ah: soh * params.nominal_capacity_ah,
        v_rc,
        throughput_ah: state.throughput_ah + current.abs() * dt_h,
    };
    Ok((next, current))
}
