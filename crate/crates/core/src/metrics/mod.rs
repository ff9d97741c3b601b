//! Evaluation metrics, statistics, the action-demand heatmap and the DP
//! oracle.

pub mod dp;
pub mod heatmap;
pub mod report;
pub mod stats;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dp::{dp_oracle, DpGrid, DpSolution, ToyScenario};
pub use heatmap::{action_demand_histogram, ActionDemandHistogram};
pub use report::{EvaluationReport, MethodResult};
pub use stats::{five_number_summary, paired_t_test, FiveNumber, PAggregation, TTest};

use crate::battery::BatteryModel;
use crate::env::{run_episode, ExogenousBundle, MdpConfig, MicrogridEnv, ProfileSelector, Trajectory};
use crate::error::{Error, Result};
use crate::policy::Policy;

/// Profile-averaged cumulative reward components; index `t - 1` holds the
/// value after `t` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSeries {
    pub trad: Vec<f64>,
    pub deg: Vec<f64>,
    /// `trad + deg`.
    pub total: Vec<f64>,
    /// Cumulative clipping penalty, reported separately.
    pub clip: Vec<f64>,
}

impl ComponentSeries {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    /// `R̂_T`.
    pub fn final_total(&self) -> f64 {
        self.total.last().copied().unwrap_or(0.0)
    }

    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::Trading => &self.trad,
            Component::Degradation => &self.deg,
            Component::Total => &self.total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Trading,
    Degradation,
    Total,
}

/// Mean over trajectories of the running sums of `r_trad`, `r_deg` and
/// their sum.
pub fn cumulative_reward(trajectories: &[Trajectory]) -> Result<ComponentSeries> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::domain("no trajectories to average"))?;
    let n = first.len();
    if trajectories.iter().any(|t| t.len() != n) {
        return Err(Error::domain("trajectories differ in length"));
    }
    let count = trajectories.len() as f64;
    let mut trad = vec![0.0; n];
    let mut deg = vec![0.0; n];
    let mut clip = vec![0.0; n];
    for traj in trajectories {
        let (mut st, mut sd, mut sc) = (0.0, 0.0, 0.0);
        for (k, step) in traj.iter().enumerate() {
            st += step.reward.r_trad;
            sd += step.reward.r_deg;
            sc += step.reward.r_clip;
            trad[k] += st;
            deg[k] += sd;
            clip[k] += sc;
        }
    }
    for v in trad.iter_mut().chain(deg.iter_mut()).chain(clip.iter_mut()) {
        *v /= count;
    }
    let total = trad.iter().zip(&deg).map(|(a, b)| a + b).collect();
    Ok(ComponentSeries { trad, deg, total, clip })
}

/// `R̂_t` after `t` steps (`t = 0` is zero).
pub fn cumulative_reward_at(trajectories: &[Trajectory], t: usize) -> Result<f64> {
    let s = cumulative_reward(trajectories)?;
    if t > s.len() {
        return Err(Error::domain(format!("step {t} beyond the horizon {}", s.len())));
    }
    Ok(if t == 0 { 0.0 } else { s.total[t - 1] })
}

/// `R̂(U) - R̂(B)` for one component, step by step.
pub fn component_gap(u: &ComponentSeries, b: &ComponentSeries, c: Component) -> Result<Vec<f64>> {
    if u.len() != b.len() {
        return Err(Error::domain(format!("horizons differ ({} vs {})", u.len(), b.len())));
    }
    Ok(u.component(c).iter().zip(b.component(c)).map(|(x, y)| x - y).collect())
}

/// Per-trajectory undiscounted `Σ (r_trad + r_deg)`.
pub fn episode_returns(trajectories: &[Trajectory]) -> Vec<f64> {
    trajectories
        .iter()
        .map(|t| t.iter().map(|s| s.reward.economic()).sum())
        .collect()
}

/// Runs `policy` deterministically over each listed profile, one episode
/// per profile starting at the first row of `bundle`.
pub fn evaluate_policy(
    policy: &dyn Policy,
    bundle: Arc<ExogenousBundle>,
    model: &BatteryModel,
    mdp: &MdpConfig,
    profiles: &[usize],
) -> Result<Vec<Trajectory>> {
    profiles
        .par_iter()
        .map(|&p| {
            let mut env = MicrogridEnv::new(bundle.clone(), model.clone(), mdp.clone(), vec![p], 0)?;
            run_episode(policy, &mut env, ProfileSelector::Index(p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{StepInfo, Transition};
    use crate::microgrid::RewardBreakdown;
    use crate::env::Observation;

    fn step(trad: f64, deg: f64, clip: f64) -> Transition {
        Transition {
            observation: Observation {
                soc: 0.5,
                temp: 20.0,
                demand_est: 0.0,
                generation_est: 0.0,
                p_buy: 0.2,
                p_sell: 0.1,
                cos_day: 1.0,
                sin_day: 0.0,
                cos_year: 1.0,
                sin_year: 0.0,
            },
            action: 0.5,
            reward: RewardBreakdown::new(trad, deg, clip, 0.1),
            info: StepInfo {
                p_g: 0.0,
                p_d: 0.0,
                p_n: 0.0,
                p_b: 0.0,
                p_e: 0.0,
                a_effective: 0.5,
                clip_magnitude: 0.0,
                current: 0.0,
                soc: 0.5,
                soh: 1.0,
            },
        }
    }

    #[test]
    fn unit_losses_accumulate_linearly() {
        let traj = vec![step(-0.5, -0.5, 0.0); 5];
        let s = cumulative_reward(&[traj]).unwrap();
        assert_eq!(s.total, vec![-1.0, -2.0, -3.0, -4.0, -5.0]);
    }

    #[test]
    fn average_of_two_profiles() {
        let a = vec![step(1.0, 0.0, 0.0); 3];
        let b = vec![step(2.0, -1.0, 0.0); 3];
        let s = cumulative_reward(&[a, b]).unwrap();
        assert_eq!(s.final_total(), (3.0 + 3.0) / 2.0);
    }

    #[test]
    fn clip_penalty_is_excluded() {
        let traj = vec![step(1.0, -0.25, 100.0); 4];
        let s = cumulative_reward(&[traj]).unwrap();
        for k in 0..4 {
            assert_eq!(s.total[k], s.trad[k] + s.deg[k]);
        }
        assert_eq!(s.clip[3], 400.0);
    }

    #[test]
    fn empty_and_ragged_inputs_fail() {
        assert!(cumulative_reward(&[]).is_err());
        assert!(cumulative_reward(&[vec![step(0.0, 0.0, 0.0); 2], vec![step(0.0, 0.0, 0.0); 3]]).is_err());
    }

    #[test]
    fn gaps() {
        let u = cumulative_reward(&[vec![step(1.0, -0.5, 0.0); 3]]).unwrap();
        let b = cumulative_reward(&[vec![step(0.5, -0.1, 0.0); 3]]).unwrap();
        assert!(component_gap(&u, &u, Component::Total).unwrap().iter().all(|&g| g == 0.0));
        let ub = component_gap(&u, &b, Component::Trading).unwrap();
        let bu = component_gap(&b, &u, Component::Trading).unwrap();
        assert!(ub.iter().zip(&bu).all(|(x, y)| *x == -y));
        let short = cumulative_reward(&[vec![step(0.5, -0.1, 0.0); 2]]).unwrap();
        assert!(component_gap(&u, &short, Component::Degradation).is_err());
    }
}
