//! Clipped-surrogate objective with hand-derived gradients.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::{entropy, log_prob};
use super::network::{ActorCritic, LOG_STD_MAX, LOG_STD_MIN};
use super::Adam;
use crate::env::OBS_DIM;
use crate::error::{Error, Result};

/// One training sample drawn from a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Observation as seen by the network (already normalized).
    pub obs: [f64; OBS_DIM],
    /// Unclamped Gaussian draw.
    pub raw_action: f64,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub clip_ratio: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Loss terms over a batch; `total` is the minimized quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// Negated mean clipped surrogate.
    pub policy_loss: f64,
    /// Mean squared value error.
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Per-sample clipped surrogate `min(r A, clip(r, 1-ε, 1+ε) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_ratio: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio);
    (ratio * advantage).min(clipped * advantage)
}

/// True when the unclipped branch of the surrogate is active, i.e. the
/// surrogate has a non-zero derivative with respect to the ratio.
fn unclipped_active(ratio: f64, advantage: f64, clip_ratio: f64) -> bool {
    !((advantage > 0.0 && ratio > 1.0 + clip_ratio) || (advantage < 0.0 && ratio < 1.0 - clip_ratio))
}

const CHUNK: usize = 32;

struct Partial {
    parts: LossParts,
    grad: Vec<f64>,
}

fn chunk_loss(net: &ActorCritic, chunk: &[Sample], w: &LossWeights, batch_len: f64) -> Partial {
    let na = net.actor.n_params();
    let mut grad = vec![0.0; net.n_params()];
    let mut parts = LossParts::default();
    let log_std = net.log_std;
    let inv_var = (-2.0 * log_std).exp();
    let (actor_grad, rest) = grad.split_at_mut(na);
    let (log_std_grad, critic_grad) = rest.split_at_mut(1);

    for s in chunk {
        let a_cache = net.actor.forward_cached(&s.obs);
        let mean = a_cache.output()[0];
        let logp = log_prob(s.raw_action, mean, log_std);
        let ratio = (logp - s.old_log_prob).exp();
        parts.policy_loss -= clipped_surrogate(ratio, s.advantage, w.clip_ratio) / batch_len;
        if (ratio - 1.0).abs() > w.clip_ratio {
            parts.clip_fraction += 1.0 / batch_len;
        }
        parts.approx_kl += ((ratio - 1.0) - (logp - s.old_log_prob)) / batch_len;

        if unclipped_active(ratio, s.advantage, w.clip_ratio) {
            // d(-surrogate / B) / d logp
            let coef = -ratio * s.advantage / batch_len;
            let diff = s.raw_action - mean;
            net.actor.backward(&a_cache, &[coef * diff * inv_var], actor_grad);
            log_std_grad[0] += coef * (diff * diff * inv_var - 1.0);
        }

        let c_cache = net.critic.forward_cached(&s.obs);
        let err = c_cache.output()[0] - s.ret;
        parts.value_loss += err * err / batch_len;
        net.critic.backward(&c_cache, &[2.0 * w.value_coef * err / batch_len], critic_grad);
    }
    Partial { parts, grad }
}

/// Loss and its gradient with respect to [`ActorCritic::to_flat`].
pub fn loss_and_grad(net: &ActorCritic, batch: &[Sample], w: &LossWeights) -> (LossParts, Vec<f64>) {
    let batch_len = batch.len().max(1) as f64;
    let partials: Vec<Partial> = batch
        .par_chunks(CHUNK)
        .map(|c| chunk_loss(net, c, w, batch_len))
        .collect();
    let mut parts = LossParts::default();
    let mut grad = vec![0.0; net.n_params()];
    // Summed in chunk order so the result is independent of thread count.
    for p in partials {
        parts.policy_loss += p.parts.policy_loss;
        parts.value_loss += p.parts.value_loss;
        parts.clip_fraction += p.parts.clip_fraction;
        parts.approx_kl += p.parts.approx_kl;
        grad.iter_mut().zip(&p.grad).for_each(|(g, d)| *g += d);
    }
    parts.entropy = entropy(net.log_std);
    parts.total = parts.policy_loss + w.value_coef * parts.value_loss - w.entropy_coef * parts.entropy;
    grad[net.actor.n_params()] -= w.entropy_coef;
    (parts, grad)
}

/// Loss only, for finite-difference checks.
pub fn loss(net: &ActorCritic, batch: &[Sample], w: &LossWeights) -> f64 {
    loss_and_grad(net, batch, w).0.total
}

/// Optimisation settings of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateSettings {
    pub weights: LossWeights,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Global gradient-norm clip; non-positive disables it.
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

/// Averages over the minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Rescales advantages to zero mean and unit variance. Batches with fewer
/// than two samples are left untouched.
pub fn normalize_advantages(samples: &mut [Sample]) {
    if samples.len() < 2 {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for s in samples.iter_mut() {
        s.advantage = (s.advantage - mean) / (std + 1e-12);
    }
}

/// Runs the epochs of minibatch gradient steps on `net`.
///
/// A non-finite loss aborts the update and leaves `net` as it was.
pub fn ppo_update<R: Rng>(
    net: &mut ActorCritic,
    adam: &mut Adam,
    samples: &mut [Sample],
    settings: &UpdateSettings,
    rng: &mut R,
) -> Result<UpdateDiagnostics> {
    if settings.normalize_advantages {
        normalize_advantages(samples);
    }
    let snapshot = net.clone();
    let adam_snapshot = adam.clone();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut diag = UpdateDiagnostics::default();
    let mut n_batches = 0usize;
    let mb = settings.minibatch_size.max(1);
    let mut batch = Vec::with_capacity(mb);

    for _ in 0..settings.epochs {
        order.shuffle(rng);
        for idx in order.chunks(mb) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| samples[i]));
            let (parts, mut grad) = loss_and_grad(net, &batch, &settings.weights);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                *net = snapshot;
                *adam = adam_snapshot;
                return Err(Error::Numerical(format!(
                    "non-finite loss in update (policy {}, value {})",
                    parts.policy_loss, parts.value_loss
                )));
            }
            if settings.max_grad_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > settings.max_grad_norm {
                    let scale = settings.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= scale);
                }
            }
            let mut flat = net.to_flat();
            adam.step(&mut flat, &grad, settings.learning_rate);
            net.set_flat(&flat);
            net.log_std = net.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);

            diag.policy_loss += parts.policy_loss;
            diag.value_loss += parts.value_loss;
            diag.entropy += parts.entropy;
            diag.clip_fraction += parts.clip_fraction;
            diag.approx_kl += parts.approx_kl;
            n_batches += 1;
        }
    }
    if n_batches > 0 {
        let n = n_batches as f64;
        diag.policy_loss /= n;
        diag.value_loss /= n;
        diag.entropy /= n;
        diag.clip_fraction /= n;
        diag.approx_kl /= n;
    }
    Ok(diag)
}
