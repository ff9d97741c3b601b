//! Power split and reward algebra for one decision step.
//!
//! Sign conventions: net power `P_N = P_G - P_D` is positive on surplus.
//! Battery power `P_B` is positive when charging; grid power `P_E` is
//! positive when selling. Prices are in €/kWh, powers in W, steps in hours.

use serde::{Deserialize, Serialize};

use crate::battery::PowerBounds;
use crate::error::{Error, Result};

/// Market prices for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub p_buy: f64,
    pub p_sell: f64,
}

impl PriceQuote {
    pub fn new(p_buy: f64, p_sell: f64) -> Result<Self> {
        if !(p_buy > 0.0 && p_sell > 0.0 && p_sell < p_buy) {
            return Err(Error::domain(format!(
                "prices must satisfy 0 < p_sell < p_buy, got buy={p_buy} sell={p_sell}"
            )));
        }
        Ok(Self { p_buy, p_sell })
    }
}

/// Outcome of splitting net power between battery and grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub a_requested: f64,
    pub a_effective: f64,
    pub p_n: f64,
    pub p_b: f64,
    pub p_e: f64,
    /// `|a_requested * P_N - P_B|` [W].
    pub clip_magnitude: f64,
}

/// Reward components of one step.
///
/// `r_clip` is in W; `lambda` converts it into the training reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_trad: f64,
    pub r_deg: f64,
    pub r_clip: f64,
    pub r_total: f64,
}

impl RewardBreakdown {
    pub fn new(r_trad: f64, r_deg: f64, r_clip: f64, lambda: f64) -> Self {
        Self {
            r_trad,
            r_deg,
            r_clip,
            r_total: r_trad + r_deg + lambda * r_clip,
        }
    }

    /// Economic part of the reward, without the clipping shaping term.
    pub fn economic(&self) -> f64 {
        self.r_trad + self.r_deg
    }
}

pub fn net_power(p_g: f64, p_d: f64) -> Result<f64> {
    if !(p_g >= 0.0 && p_d >= 0.0) {
        return Err(Error::domain(format!(
            "generation and demand must be non-negative, got {p_g} and {p_d}"
        )));
    }
    Ok(p_g - p_d)
}

/// Routes the fraction `a` of net power to the battery, clamped to `bounds`.
pub fn dispatch(a: f64, p_n: f64, bounds: PowerBounds) -> Result<Dispatch> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain(format!("action {a} outside [0, 1]")));
    }
    debug_assert!(bounds.lo <= 0.0 && 0.0 <= bounds.hi);
    let raw = a * p_n;
    let p_b = bounds.clamp(raw);
    let a_effective = if p_n != 0.0 { p_b / p_n } else { a };
    Ok(Dispatch {
        a_requested: a,
        a_effective,
        p_n,
        p_b,
        p_e: p_n - p_b,
        clip_magnitude: (raw - p_b).abs(),
    })
}

/// Money exchanged with the grid [€]; positive when selling.
pub fn reward_trading(p_e: f64, quote: &PriceQuote, dt_h: f64) -> f64 {
    let kw = p_e / 1000.0;
    (quote.p_sell * kw.max(0.0) + quote.p_buy * kw.min(0.0)) * dt_h
}

/// Pro-rata share of the replacement cost consumed by the SoH drop.
pub fn reward_degradation(soh_prev: f64, soh_curr: f64, soh_eol: f64, replacement_cost: f64) -> Result<f64> {
    if soh_curr > soh_prev {
        return Err(Error::domain(format!("SoH rose from {soh_prev} to {soh_curr}")));
    }
    if !(soh_eol > 0.0 && soh_eol < 1.0) {
        return Err(Error::domain(format!("soh_eol {soh_eol} outside (0, 1)")));
    }
    if replacement_cost < 0.0 {
        return Err(Error::domain("replacement cost must be non-negative"));
    }
    Ok((soh_curr - soh_prev) / (1.0 - soh_eol) * replacement_cost)
}

/// Inputs of the SoC-headroom penalty.
#[derive(Debug, Clone, Copy)]
pub struct HeadroomContext {
    pub soc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub capacity_ah: f64,
    pub voltage: f64,
    pub dt_h: f64,
}

/// Penalty (≤ 0, in W) for requesting power outside the SoC headroom.
pub fn reward_clip(a: f64, p_n: f64, ctx: &HeadroomContext) -> f64 {
    let scale = ctx.capacity_ah * ctx.voltage / ctx.dt_h;
    let request = a * p_n;
    let over = request + (ctx.soc - ctx.soc_max) * scale;
    let under = (ctx.soc_min - ctx.soc) * scale - request;
    -(0.0f64.max(over).max(under))
}
