use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::gaussian::{sample_action, SampledAction};
use super::mlp::Mlp;
use super::normalizer::RunningNorm;
use crate::env::{Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::policy::Policy;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Gaussian actor with a state-independent log-std, plus a value critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub log_std: f64,
    pub critic: Mlp,
}

impl ActorCritic {
    /// Actor output starts near `initial_mean` with a small output layer.
    pub fn new<R: Rng>(hidden: &[usize], init_log_std: f64, initial_mean: f64, rng: &mut R) -> Self {
        let sizes: Vec<usize> = std::iter::once(OBS_DIM)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let mut actor = Mlp::init(&sizes, 0.01, rng);
        actor.set_output_bias(0, initial_mean);
        let critic = Mlp::init(&sizes, 1.0, rng);
        Self {
            actor,
            log_std: init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX),
            critic,
        }
    }

    pub fn zeros(hidden: &[usize]) -> Self {
        let sizes: Vec<usize> = std::iter::once(OBS_DIM)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        Self {
            actor: Mlp::zeros(&sizes),
            log_std: 0.0,
            critic: Mlp::zeros(&sizes),
        }
    }

    fn check_input(obs: &[f64]) -> Result<()> {
        if obs.len() != OBS_DIM {
            return Err(Error::Numerical(format!("expected {OBS_DIM} inputs, got {}", obs.len())));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite network input".into()));
        }
        Ok(())
    }

    /// Action mean and log-std for a normalized observation.
    pub fn forward_actor(&self, obs: &[f64]) -> Result<(f64, f64)> {
        Self::check_input(obs)?;
        Ok((self.actor.forward(obs)[0], self.log_std))
    }

    pub fn forward_critic(&self, obs: &[f64]) -> Result<f64> {
        Self::check_input(obs)?;
        Ok(self.critic.forward(obs)[0])
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + 1 + self.critic.n_params()
    }

    /// Actor weights, then log-std, then critic weights.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(self.actor.params());
        v.push(self.log_std);
        v.extend_from_slice(self.critic.params());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let na = self.actor.n_params();
        self.actor.params_mut().copy_from_slice(&flat[..na]);
        self.log_std = flat[na];
        self.critic.params_mut().copy_from_slice(&flat[na + 1..]);
    }
}

/// Trained controller: network plus the observation statistics it was
/// trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: ActorCritic,
    pub normalizer: Option<RunningNorm>,
}

impl GaussianPolicy {
    pub fn normalize(&self, obs: &Observation) -> [f64; OBS_DIM] {
        let raw = obs.to_array();
        match &self.normalizer {
            Some(n) => n.normalize(&raw),
            None => raw,
        }
    }

    pub fn sample(&self, obs: &Observation, rng: &mut dyn RngCore) -> Result<SampledAction> {
        let (mean, log_std) = self.net.forward_actor(&self.normalize(obs))?;
        Ok(sample_action(mean, log_std, rng))
    }
}

impl Policy for GaussianPolicy {
    /// Clamped mean of the action distribution.
    fn act(&self, obs: &Observation) -> f64 {
        match self.net.forward_actor(&self.normalize(obs)) {
            Ok((mean, _)) => mean.clamp(0.0, 1.0),
            Err(_) => f64::NAN,
        }
    }

    fn act_stochastic(&self, obs: &Observation, rng: &mut dyn RngCore) -> f64 {
        self.sample(obs, rng).map_or(f64::NAN, |s| s.action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_outputs() {
        let net = ActorCritic::zeros(&[64, 64]);
        let x = [1.5; OBS_DIM];
        assert_eq!(net.forward_actor(&x).unwrap().0, 0.0);
        assert_eq!(net.forward_critic(&x).unwrap(), 0.0);
    }

    #[test]
    fn nan_input_is_rejected() {
        let net = ActorCritic::zeros(&[8]);
        let mut x = [0.0; OBS_DIM];
        x[3] = f64::NAN;
        assert!(net.forward_actor(&x).is_err());
        assert!(net.forward_critic(&x).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = ActorCritic::new(&[64, 64], -0.5, 0.5, &mut rng);
        let x = [0.2; OBS_DIM];
        assert_eq!(net.forward_actor(&x).unwrap(), net.forward_actor(&x).unwrap());
        assert_eq!(net.forward_critic(&x).unwrap(), net.forward_critic(&x).unwrap());
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = ActorCritic::new(&[6, 4], -0.5, 0.5, &mut rng);
        let mut other = ActorCritic::zeros(&[6, 4]);
        other.set_flat(&net.to_flat());
        assert_eq!(net, other);
    }
}
