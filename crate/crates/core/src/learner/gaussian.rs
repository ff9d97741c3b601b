use rand::Rng;
use rand_distr::StandardNormal;

/// `0.5 * ln(2π)`.
const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

/// Log-density of `x` under `N(mean, exp(log_std)^2)`.
pub fn log_prob(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - HALF_LN_TAU
}

/// Differential entropy of the Gaussian.
pub fn entropy(log_std: f64) -> f64 {
    log_std + 0.5 + HALF_LN_TAU
}

/// A sampled action: the clamped value sent to the environment, the raw
/// Gaussian draw, and the log-density of the raw draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub action: f64,
    pub raw: f64,
    pub log_prob: f64,
}

pub fn sample_action<R: Rng + ?Sized>(mean: f64, log_std: f64, rng: &mut R) -> SampledAction {
    let eps: f64 = rng.sample(StandardNormal);
    let raw = mean + log_std.exp() * eps;
    SampledAction {
        action: raw.clamp(0.0, 1.0),
        raw,
        log_prob: log_prob(raw, mean, log_std),
    }
}
