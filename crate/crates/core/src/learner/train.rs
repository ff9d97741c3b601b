//! Parallel rollout collection and the outer training loop.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gae::compute_gae;
use super::gaussian::sample_action;
use super::network::{ActorCritic, GaussianPolicy};
use super::normalizer::RunningNorm;
use super::ppo::{ppo_update, LossWeights, Sample, UpdateDiagnostics, UpdateSettings};
use super::Adam;
use crate::battery::BatteryModel;
use crate::env::{ExogenousBundle, MdpConfig, MicrogridEnv, Observation, ProfileSelector, OBS_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub n_envs: usize,
    /// Total training episodes, spread evenly over the environments. Zero
    /// returns the initial policy.
    pub n_episodes: usize,
    /// Steps collected per environment between updates.
    pub rollout_len: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Rewards are divided by this before learning.
    pub reward_scale: f64,
    pub normalize_obs: bool,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Actor output bias at initialisation.
    pub initial_action: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            n_envs: 4,
            n_episodes: 100,
            rollout_len: 2048,
            minibatch_size: 256,
            epochs: 10,
            clip_ratio: 0.2,
            learning_rate: 3e-4,
            gae_lambda: 0.95,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            reward_scale: 1.0,
            normalize_obs: true,
            normalize_advantages: true,
            hidden: vec![64, 64],
            init_log_std: -0.5,
            initial_action: 0.5,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_envs", self.n_envs),
            ("rollout_len", self.rollout_len),
            ("minibatch_size", self.minibatch_size),
            ("epochs", self.epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(Error::config(format!("clip ratio {} outside (0, 1)", self.clip_ratio)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config(format!("gae_lambda {} outside [0, 1]", self.gae_lambda)));
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return Err(Error::config("loss coefficients must be non-negative"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("reward scale must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden layer sizes must be positive"));
        }
        if !self.init_log_std.is_finite() || !self.initial_action.is_finite() {
            return Err(Error::config("initial actor parameters must be finite"));
        }
        Ok(())
    }

    /// Episodes run by each environment.
    pub fn episodes_per_env(&self) -> usize {
        self.n_episodes.div_ceil(self.n_envs)
    }

    fn update_settings(&self) -> UpdateSettings {
        UpdateSettings {
            weights: LossWeights {
                clip_ratio: self.clip_ratio,
                value_coef: self.value_coef,
                entropy_coef: self.entropy_coef,
            },
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            minibatch_size: self.minibatch_size,
            max_grad_norm: self.max_grad_norm,
            normalize_advantages: self.normalize_advantages,
        }
    }
}

/// One finished training episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Position in the learning curve.
    pub episode: usize,
    pub env: usize,
    /// Undiscounted sum of `r_total`.
    pub total_return: f64,
    /// Undiscounted sum of `r_trad + r_deg`.
    pub economic_return: f64,
    /// Mean clipped power per step, in W.
    pub mean_clip_w: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub steps: usize,
    pub diagnostics: UpdateDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub policy: GaussianPolicy,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
}

/// Step-level columns of one environment's rollout.
#[derive(Debug, Default, Clone)]
pub struct RolloutBuffer {
    pub obs: Vec<[f64; OBS_DIM]>,
    pub raw_obs: Vec<[f64; OBS_DIM]>,
    pub raw_actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub last_value: f64,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Pairs every step with its advantage and return.
    pub fn into_samples(self, gamma: f64, gae_lambda: f64) -> Result<Vec<Sample>> {
        let (adv, ret) = compute_gae(&self.rewards, &self.values, &self.dones, self.last_value, gamma, gae_lambda);
        if adv.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numerical("non-finite advantage".into()));
        }
        Ok((0..self.len())
            .map(|t| Sample {
                obs: self.obs[t],
                raw_action: self.raw_actions[t],
                old_log_prob: self.log_probs[t],
                advantage: adv[t],
                ret: ret[t],
            })
            .collect())
    }
}

struct Worker {
    index: usize,
    env: MicrogridEnv,
    rng: ChaCha8Rng,
    obs: Observation,
    ep_total: f64,
    ep_econ: f64,
    ep_clip: f64,
    ep_steps: usize,
    finished: usize,
}

fn network_input(norm: Option<&RunningNorm>, raw: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
    match norm {
        Some(n) => n.normalize(raw),
        None => *raw,
    }
}

impl Worker {
    /// Steps the environment `n` times under the current policy.
    fn collect(
        &mut self,
        net: &ActorCritic,
        norm: Option<&RunningNorm>,
        n: usize,
        reward_scale: f64,
        n_envs: usize,
        quota: usize,
    ) -> Result<(RolloutBuffer, Vec<EpisodeRecord>)> {
        let mut buf = RolloutBuffer::default();
        let mut done_episodes = Vec::new();
        for _ in 0..n {
            let raw = self.obs.to_array();
            let x = network_input(norm, &raw);
            let (mean, log_std) = net.forward_actor(&x)?;
            let value = net.forward_critic(&x)?;
            let s = sample_action(mean, log_std, &mut self.rng);
            let out = self.env.step(s.action)?;

            buf.obs.push(x);
            buf.raw_obs.push(raw);
            buf.raw_actions.push(s.raw);
            buf.log_probs.push(s.log_prob);
            buf.rewards.push(out.reward.r_total / reward_scale);
            buf.values.push(value);
            buf.dones.push(out.done);

            self.ep_total += out.reward.r_total;
            self.ep_econ += out.reward.economic();
            self.ep_clip += out.info.clip_magnitude;
            self.ep_steps += 1;
            if out.done {
                done_episodes.push(EpisodeRecord {
                    episode: self.finished * n_envs + self.index,
                    env: self.index,
                    total_return: self.ep_total,
                    economic_return: self.ep_econ,
                    mean_clip_w: self.ep_clip / self.ep_steps as f64,
                    steps: self.ep_steps,
                });
                self.finished += 1;
                self.ep_total = 0.0;
                self.ep_econ = 0.0;
                self.ep_clip = 0.0;
                self.ep_steps = 0;
                if self.finished < quota {
                    self.obs = self.env.reset(ProfileSelector::Random)?;
                }
            } else {
                self.obs = out.observation;
            }
        }
        buf.last_value = match buf.dones.last() {
            Some(false) => net.forward_critic(&network_input(norm, &self.obs.to_array()))?,
            _ => 0.0,
        };
        Ok((buf, done_episodes))
    }
}

/// Seed of environment `i`, kept apart from the network stream.
fn worker_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1 + i as u64)
}

/// Trains a policy on `bundle`, drawing episodes from the profiles in `pool`
/// (all profiles when empty).
pub fn train(
    bundle: Arc<ExogenousBundle>,
    model: &BatteryModel,
    mdp: &MdpConfig,
    cfg: &LearnerConfig,
    pool: &[usize],
) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = ActorCritic::new(&cfg.hidden, cfg.init_log_std, cfg.initial_action, &mut init_rng);
    let mut adam = Adam::new(net.n_params());
    let settings = cfg.update_settings();
    let quota = cfg.episodes_per_env();

    let mut workers = (0..cfg.n_envs)
        .map(|i| {
            let mut env = MicrogridEnv::new(bundle.clone(), model.clone(), mdp.clone(), pool.to_vec(), worker_seed(cfg.seed, i))?;
            let obs = env.reset(ProfileSelector::Random)?;
            Ok(Worker {
                index: i,
                env,
                rng: ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, i) ^ 0xA5A5_A5A5),
                obs,
                ep_total: 0.0,
                ep_econ: 0.0,
                ep_clip: 0.0,
                ep_steps: 0,
                finished: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut norm = cfg.normalize_obs.then(RunningNorm::default);
    if let Some(n) = norm.as_mut().filter(|_| cfg.n_episodes > 0) {
        prime_normalizer(n, &net, &mut workers, cfg.rollout_len.min(mdp.horizon))?;
    }

    let total_steps = quota * mdp.horizon;
    let mut steps_done = 0;
    let mut episodes = Vec::new();
    let mut updates = Vec::new();
    while steps_done < total_steps {
        let n = cfg.rollout_len.min(total_steps - steps_done);
        let results = workers
            .par_iter_mut()
            .map(|w| w.collect(&net, norm.as_ref(), n, cfg.reward_scale, cfg.n_envs, quota))
            .collect::<Result<Vec<_>>>()?;
        steps_done += n;

        let mut samples = Vec::with_capacity(n * cfg.n_envs);
        let mut raw_obs = Vec::with_capacity(n * cfg.n_envs);
        for (buf, eps) in results {
            raw_obs.extend_from_slice(&buf.raw_obs);
            samples.extend(buf.into_samples(mdp.gamma, cfg.gae_lambda)?);
            episodes.extend(eps);
        }
        let mut update_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((updates.len() as u64 + 1) << 20));
        let diagnostics = ppo_update(&mut net, &mut adam, &mut samples, &settings, &mut update_rng)?;
        updates.push(UpdateRecord {
            update: updates.len(),
            steps: steps_done,
            diagnostics,
        });
        if let Some(nm) = norm.as_mut() {
            nm.update(&raw_obs);
        }
    }
    episodes.sort_by_key(|e| e.episode);
    episodes.truncate(cfg.n_episodes);
    episodes.iter_mut().enumerate().for_each(|(i, e)| e.episode = i);

    Ok(TrainOutput {
        policy: GaussianPolicy { net, normalizer: norm },
        episodes,
        updates,
    })
}

/// Seeds the observation statistics with a short rollout of the initial
/// policy, then restarts every environment.
fn prime_normalizer(norm: &mut RunningNorm, net: &ActorCritic, workers: &mut [Worker], steps: usize) -> Result<()> {
    // Statistics are not known yet, so the actor sees a neutral input.
    let (mean, log_std) = net.forward_actor(&[0.0; OBS_DIM])?;
    for w in workers.iter_mut() {
        let mut raw = Vec::with_capacity(steps);
        raw.push(w.obs.to_array());
        for _ in 1..steps {
            let a = sample_action(mean, log_std, &mut w.rng).action;
            let out = w.env.step(a)?;
            if out.done {
                break;
            }
            w.obs = out.observation;
            raw.push(w.obs.to_array());
        }
        norm.update(&raw);
        w.obs = w.env.reset(ProfileSelector::Random)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{AgingParams, BatteryParams};
    use chrono::NaiveDate;

    fn bundle(days: usize) -> Arc<ExogenousBundle> {
        let n = 24 * days;
        let generation: Vec<f64> = (0..n)
            .map(|k| {
                let h = (k % 24) as f64;
                (4000.0 * (std::f64::consts::PI * (h - 6.0) / 12.0).sin()).max(0.0)
            })
            .collect();
        Arc::new(ExogenousBundle {
            start: NaiveDate::from_ymd_opt(2019, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            step_seconds: 3600.0,
            generation,
            profile_ids: vec!["a".into(), "b".into()],
            demand: vec![vec![1200.0; n], (0..n).map(|k| 800.0 + 50.0 * (k % 24) as f64).collect()],
            p_buy: (0..n).map(|k| if (k % 24) >= 17 { 0.4 } else { 0.25 }).collect(),
            p_sell: vec![0.05; n],
            ambient: vec![20.0; n],
        })
    }

    fn small_cfg() -> LearnerConfig {
        LearnerConfig {
            n_envs: 2,
            n_episodes: 4,
            rollout_len: 24,
            minibatch_size: 16,
            epochs: 2,
            hidden: vec![8, 8],
            seed: 3,
            ..LearnerConfig::default()
        }
    }

    fn mdp() -> MdpConfig {
        MdpConfig {
            horizon: 48,
            ..MdpConfig::default()
        }
    }

    fn model() -> BatteryModel {
        BatteryModel::Thevenin(BatteryParams {
            aging: AgingParams::default(),
            ..BatteryParams::default()
        })
    }

    #[test]
    fn seeded_runs_agree() {
        let a = train(bundle(4), &model(), &mdp(), &small_cfg(), &[]).unwrap();
        let b = train(bundle(4), &model(), &mdp(), &small_cfg(), &[]).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.episodes.len(), 4);
    }

    #[test]
    fn zero_learning_rate_keeps_initial_network() {
        let cfg = LearnerConfig {
            learning_rate: 0.0,
            ..small_cfg()
        };
        let out = train(bundle(4), &model(), &mdp(), &cfg, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let initial = ActorCritic::new(&cfg.hidden, cfg.init_log_std, cfg.initial_action, &mut rng);
        assert_eq!(out.policy.net, initial);
    }

    #[test]
    fn episodes_are_split_over_envs() {
        let cfg = LearnerConfig {
            n_envs: 3,
            n_episodes: 5,
            ..small_cfg()
        };
        let out = train(bundle(4), &model(), &mdp(), &cfg, &[]).unwrap();
        assert_eq!(out.episodes.len(), 5);
        assert!(out.episodes.iter().all(|e| e.steps == 48));
        let idx: Vec<usize> = out.episodes.iter().map(|e| e.episode).collect();
        assert_eq!(idx, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn zero_episodes_return_the_initial_policy() {
        let cfg = LearnerConfig {
            n_episodes: 0,
            ..small_cfg()
        };
        let out = train(bundle(4), &model(), &mdp(), &cfg, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let initial = ActorCritic::new(&cfg.hidden, cfg.init_log_std, cfg.initial_action, &mut rng);
        assert_eq!(out.policy.net, initial);
        assert_eq!(out.policy.normalizer, Some(RunningNorm::default()));
        assert!(out.episodes.is_empty() && out.updates.is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = LearnerConfig {
            clip_ratio: 1.5,
            ..small_cfg()
        };
        assert!(matches!(
            train(bundle(4), &model(), &mdp(), &cfg, &[]),
            Err(Error::Config(_))
        ));
    }
}
