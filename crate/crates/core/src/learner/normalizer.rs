use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;

const CLIP: f64 = 10.0;
const EPS: f64 = 1e-8;

/// Running per-component mean and variance of observations.
///
/// Batches are merged with Chan's parallel update, so the result does not
/// depend on how a stream is chunked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: [f64; OBS_DIM],
    /// Sum of squared deviations from the mean.
    pub m2: [f64; OBS_DIM],
}

impl Default for RunningNorm {
    fn default() -> Self {
        Self {
            count: 0.0,
            mean: [0.0; OBS_DIM],
            m2: [0.0; OBS_DIM],
        }
    }
}

impl RunningNorm {
    pub fn update(&mut self, batch: &[[f64; OBS_DIM]]) {
        if batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let mut mean = [0.0; OBS_DIM];
        for x in batch {
            for i in 0..OBS_DIM {
                mean[i] += x[i];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut m2 = [0.0; OBS_DIM];
        for x in batch {
            for i in 0..OBS_DIM {
                let d = x[i] - mean[i];
                m2[i] += d * d;
            }
        }
        let total = self.count + n;
        for i in 0..OBS_DIM {
            let delta = mean[i] - self.mean[i];
            self.mean[i] += delta * n / total;
            self.m2[i] += m2[i] + delta * delta * self.count * n / total;
        }
        self.count = total;
    }

    /// Population variance of each component.
    pub fn variance(&self) -> [f64; OBS_DIM] {
        let mut v = [1.0; OBS_DIM];
        if self.count > 0.0 {
            for i in 0..OBS_DIM {
                v[i] = self.m2[i] / self.count;
            }
        }
        v
    }

    pub fn normalize(&self, x: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let var = self.variance();
        let mut out = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            out[i] = ((x[i] - self.mean[i]) / (var[i] + EPS).sqrt()).clamp(-CLIP, CLIP);
        }
        out
    }
}
