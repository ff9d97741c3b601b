//! Episodic dispatch MDP.
//!
//! One environment instance owns one battery and walks a window of an
//! [`ExogenousBundle`] for a single demand profile. Observations carry the
//! battery state, lag-1 estimates of demand and generation, the current
//! prices and sin/cos encodings of the time of day and of the year.

mod bundle;

pub use bundle::{
    advance_hours, seconds_into_year, ExogenousBundle, HOURS_PER_YEAR, SECONDS_PER_DAY, SECONDS_PER_YEAR,
};

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::battery::{BatteryModel, BatteryState};
use crate::error::{Error, Result};
use crate::microgrid::{self, HeadroomContext, RewardBreakdown};

pub const OBS_DIM: usize = 10;

/// How the demand and generation entries of the observation are estimated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimation {
    /// Previous step's true value (current value on the first step).
    #[default]
    Lag1,
    /// Current step's true value.
    Perfect,
}

/// Initial-state distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitRule {
    /// `initial_soc`, `initial_soh` and the first ambient temperature.
    #[default]
    Fixed,
    /// SoC drawn uniformly in `[lo, hi]` at each reset.
    UniformSoc { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpConfig {
    pub gamma: f64,
    /// Steps per episode.
    pub horizon: usize,
    pub dt_seconds: f64,
    /// Weight of the clipping penalty in the training reward.
    pub lambda: f64,
    pub initial_soc: f64,
    pub initial_soh: f64,
    /// Battery replacement cost [€].
    pub replacement_cost: f64,
    pub init: InitRule,
    pub estimation: Estimation,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            horizon: HOURS_PER_YEAR,
            dt_seconds: 3600.0,
            lambda: 0.1,
            initial_soc: 0.5,
            initial_soh: 1.0,
            replacement_cost: 3000.0,
            init: InitRule::Fixed,
            estimation: Estimation::Lag1,
        }
    }
}

impl MdpConfig {
    pub fn dt_hours(&self) -> f64 {
        self.dt_seconds / 3600.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least one step"));
        }
        if !(self.dt_seconds > 0.0) {
            return Err(Error::config("dt_seconds must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) || !(self.initial_soh > 0.0 && self.initial_soh <= 1.0) {
            return Err(Error::config("initial soc must be in [0, 1] and soh in (0, 1]"));
        }
        if !(self.replacement_cost >= 0.0) {
            return Err(Error::config("replacement cost must be non-negative"));
        }
        if let InitRule::UniformSoc { lo, hi } = self.init {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::config("uniform soc range must satisfy 0 <= lo <= hi <= 1"));
            }
        }
        Ok(())
    }
}

/// The 10-component state vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub soc: f64,
    pub temp: f64,
    pub demand_est: f64,
    pub generation_est: f64,
    pub p_buy: f64,
    pub p_sell: f64,
    pub cos_day: f64,
    pub sin_day: f64,
    pub cos_year: f64,
    pub sin_year: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [
            self.soc,
            self.temp,
            self.demand_est,
            self.generation_est,
            self.p_buy,
            self.p_sell,
            self.cos_day,
            self.sin_day,
            self.cos_year,
            self.sin_year,
        ]
    }
}

/// Observation for series row `k`, the `step`-th step (0-based) of an episode.
pub fn build_observation(
    bundle: &ExogenousBundle,
    profile: usize,
    k: usize,
    step: usize,
    state: &BatteryState,
    estimation: Estimation,
) -> Observation {
    let est_row = match estimation {
        Estimation::Lag1 if step > 0 => k - 1,
        _ => k,
    };
    let elapsed = bundle.start_offset_seconds() + k as f64 * bundle.step_seconds;
    let phi_day = TAU * elapsed.rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_DAY;
    let phi_year = TAU * elapsed.rem_euclid(SECONDS_PER_YEAR) / SECONDS_PER_YEAR;
    Observation {
        soc: state.soc,
        temp: state.temp,
        demand_est: bundle.demand[profile][est_row],
        generation_est: bundle.generation[est_row],
        p_buy: bundle.p_buy[k],
        p_sell: bundle.p_sell[k],
        cos_day: phi_day.cos(),
        sin_day: phi_day.sin(),
        cos_year: phi_year.cos(),
        sin_year: phi_year.sin(),
    }
}

/// Physical quantities realised by one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub p_g: f64,
    pub p_d: f64,
    pub p_n: f64,
    pub p_b: f64,
    pub p_e: f64,
    pub a_effective: f64,
    pub clip_magnitude: f64,
    pub current: f64,
    pub soc: f64,
    pub soh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}

/// Which profile and window an episode uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSelector {
    /// Profile index into the bundle, window starting at row 0.
    Index(usize),
    /// Profile index and explicit first row.
    Pinned { profile: usize, start: usize },
    /// Uniform profile from the environment's pool and uniform
    /// horizon-aligned window.
    Random,
}

#[derive(Debug, Clone)]
struct Episode {
    profile: usize,
    offset: usize,
    step: usize,
    state: BatteryState,
    done: bool,
}

/// Dispatch environment over one bundle.
#[derive(Debug, Clone)]
pub struct MicrogridEnv {
    bundle: Arc<ExogenousBundle>,
    model: BatteryModel,
    config: MdpConfig,
    pool: Vec<usize>,
    rng: ChaCha8Rng,
    episode: Option<Episode>,
}

impl MicrogridEnv {
    /// `pool` lists the profiles eligible for random draws; empty means all.
    pub fn new(
        bundle: Arc<ExogenousBundle>,
        model: BatteryModel,
        config: MdpConfig,
        pool: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        bundle.validate()?;
        model.validate()?;
        config.validate()?;
        if config.horizon > bundle.len() {
            return Err(Error::config(format!(
                "horizon of {} steps exceeds the {} available rows",
                config.horizon,
                bundle.len()
            )));
        }
        if (config.dt_seconds - bundle.step_seconds).abs() > 1e-9 {
            return Err(Error::config(format!(
                "decision step {} s differs from the data resolution {} s",
                config.dt_seconds, bundle.step_seconds
            )));
        }
        let pool = if pool.is_empty() {
            (0..bundle.n_profiles()).collect()
        } else {
            pool
        };
        if let Some(&bad) = pool.iter().find(|&&i| i >= bundle.n_profiles()) {
            return Err(Error::config(format!("profile index {bad} out of range")));
        }
        Ok(Self {
            bundle,
            model,
            config,
            pool,
            rng: ChaCha8Rng::seed_from_u64(seed),
            episode: None,
        })
    }

    pub fn bundle(&self) -> &ExogenousBundle {
        &self.bundle
    }

    pub fn model(&self) -> &BatteryModel {
        &self.model
    }

    pub fn config(&self) -> &MdpConfig {
        &self.config
    }

    pub fn battery(&self) -> Option<&BatteryState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    /// Index of the profile driving the current episode.
    pub fn profile(&self) -> Option<usize> {
        self.episode.as_ref().map(|e| e.profile)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().map_or(true, |e| e.done)
    }

    pub fn reset(&mut self, selector: ProfileSelector) -> Result<Observation> {
        let n = self.bundle.n_profiles();
        let (profile, offset) = match selector {
            ProfileSelector::Index(p) => (p, 0),
            ProfileSelector::Pinned { profile, start } => (profile, start),
            ProfileSelector::Random => {
                let p = self.pool[self.rng.gen_range(0..self.pool.len())];
                let windows = self.bundle.len() / self.config.horizon;
                let w = self.rng.gen_range(0..windows);
                (p, w * self.config.horizon)
            }
        };
        if profile >= n {
            return Err(Error::config(format!("profile index {profile} out of range (have {n})")));
        }
        if offset + self.config.horizon > self.bundle.len() {
            return Err(Error::config(format!("episode starting at row {offset} runs past the data")));
        }
        let soc = match self.config.init {
            InitRule::Fixed => self.config.initial_soc,
            InitRule::UniformSoc { lo, hi } => {
                if hi > lo {
                    self.rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            }
        };
        let state = self
            .model
            .initial_state(soc, self.bundle.ambient[offset], self.config.initial_soh);
        let obs = build_observation(&self.bundle, profile, offset, 0, &state, self.config.estimation);
        self.episode = Some(Episode {
            profile,
            offset,
            step: 0,
            state,
            done: false,
        });
        Ok(obs)
    }

    pub fn step(&mut self, a: f64) -> Result<StepOutcome> {
        let episode = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::State("step called before reset".into()))?;
        if episode.done {
            return Err(Error::State("step called on a finished episode".into()));
        }
        let bundle = &self.bundle;
        let cfg = &self.config;
        let dt_h = cfg.dt_hours();
        let k = episode.offset + episode.step;
        let state = episode.state;

        let p_g = bundle.generation[k];
        let p_d = bundle.demand[episode.profile][k];
        let p_n = microgrid::net_power(p_g, p_d)?;
        let bounds = self.model.feasible_power_bounds(&state, dt_h);
        let d = microgrid::dispatch(a, p_n, bounds)?;

        let (soc_min, soc_max) = self.model.soc_window();
        let headroom = HeadroomContext {
            soc: state.soc,
            soc_min,
            soc_max,
            capacity_ah: state.capacity_ah,
            voltage: self.model.terminal_voltage(&state),
            dt_h,
        };
        let r_clip = microgrid::reward_clip(a, p_n, &headroom);

        let (next, current) = self.model.step(&state, bundle.ambient[k], d.p_b, dt_h)?;
        let r_trad = microgrid::reward_trading(d.p_e, &bundle.quote(k), dt_h);
        let r_deg = microgrid::reward_degradation(state.soh, next.soh, self.model.soh_eol(), cfg.replacement_cost)?;
        let reward = RewardBreakdown::new(r_trad, r_deg, r_clip, cfg.lambda);

        episode.state = next;
        episode.step += 1;
        episode.done = episode.step == cfg.horizon;
        // The terminal observation repeats the last row's exogenous values.
        let obs_step = if episode.done { episode.step - 1 } else { episode.step };
        let observation = build_observation(
            bundle,
            episode.profile,
            episode.offset + obs_step,
            obs_step,
            &next,
            cfg.estimation,
        );

        Ok(StepOutcome {
            observation,
            reward,
            done: episode.done,
            info: StepInfo {
                p_g,
                p_d,
                p_n,
                p_b: d.p_b,
                p_e: d.p_e,
                a_effective: d.a_effective,
                clip_magnitude: d.clip_magnitude,
                current,
                soc: next.soc,
                soh: next.soh,
            },
        })
    }
}

/// One `(s_t, a_t, r_t)` record with the step's physical quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: f64,
    pub reward: RewardBreakdown,
    pub info: StepInfo,
}

pub type Trajectory = Vec<Transition>;

/// Resets `env` and steps it with `act` until the episode ends.
pub fn run_episode_with<F>(env: &mut MicrogridEnv, selector: ProfileSelector, mut act: F) -> Result<Trajectory>
where
    F: FnMut(&Observation) -> f64,
{
    let mut obs = env.reset(selector)?;
    let mut trajectory = Vec::with_capacity(env.config().horizon);
    loop {
        let action = act(&obs);
        let out = env.step(action)?;
        trajectory.push(Transition {
            observation: obs,
            action,
            reward: out.reward,
            info: out.info,
        });
        if out.done {
            return Ok(trajectory);
        }
        obs = out.observation;
    }
}

/// Runs one episode with the policy's deterministic action.
pub fn run_episode(
    policy: &dyn crate::policy::Policy,
    env: &mut MicrogridEnv,
    selector: ProfileSelector,
) -> Result<Trajectory> {
    run_episode_with(env, selector, |obs| policy.act(obs))
}

#[cfg(test)]
mod tests;
