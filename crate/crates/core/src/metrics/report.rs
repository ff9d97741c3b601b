//! Per-method evaluation results and their CSV renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{aggregate_p, five_number_summary, mean, paired_t_test, PAggregation};
use super::{component_gap, cumulative_reward, Component, ComponentSeries};
use crate::env::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub profile_ids: Vec<String>,
    pub series: ComponentSeries,
    /// Per-profile `Σ r_trad`.
    pub trad_returns: Vec<f64>,
    /// Per-profile `Σ r_deg`.
    pub deg_returns: Vec<f64>,
    /// Per-profile `Σ (r_trad + r_deg)`.
    pub returns: Vec<f64>,
    /// Mean clipped power per step over all profiles, in W.
    pub mean_clip_w: f64,
}

impl MethodResult {
    pub fn from_trajectories(method: &str, profile_ids: &[String], trajectories: &[Trajectory]) -> Result<Self> {
        if profile_ids.len() != trajectories.len() {
            return Err(Error::domain("one trajectory per profile expected"));
        }
        let series = cumulative_reward(trajectories)?;
        let sum = |f: &dyn Fn(&crate::env::Transition) -> f64| -> Vec<f64> {
            trajectories.iter().map(|t| t.iter().map(f).sum()).collect()
        };
        let trad_returns = sum(&|s| s.reward.r_trad);
        let deg_returns = sum(&|s| s.reward.r_deg);
        let returns = trad_returns.iter().zip(&deg_returns).map(|(a, b)| a + b).collect();
        let steps: usize = trajectories.iter().map(|t| t.len()).sum();
        let clip: f64 = trajectories.iter().flatten().map(|s| s.info.clip_magnitude).sum();
        Ok(Self {
            method: method.to_string(),
            profile_ids: profile_ids.to_vec(),
            series,
            trad_returns,
            deg_returns,
            returns,
            mean_clip_w: clip / steps.max(1) as f64,
        })
    }
}

/// Results of several methods on the same profiles and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub methods: Vec<MethodResult>,
    /// Method the gaps are taken against.
    pub baseline: String,
}

impl EvaluationReport {
    pub fn new(methods: Vec<MethodResult>, baseline: &str) -> Result<Self> {
        if methods.is_empty() {
            return Err(Error::domain("report needs at least one method"));
        }
        let first = &methods[0];
        for m in &methods[1..] {
            if m.profile_ids != first.profile_ids || m.series.len() != first.series.len() {
                return Err(Error::domain(format!(
                    "method {} was evaluated on different profiles or horizon",
                    m.method
                )));
            }
        }
        Ok(Self {
            methods,
            baseline: baseline.to_string(),
        })
    }

    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Name of the method with the highest `R̂_T`; ties go to the earlier
    /// method.
    pub fn best(&self) -> &MethodResult {
        self.methods
            .iter()
            .fold(None::<&MethodResult>, |best, m| match best {
                Some(b) if b.series.final_total() >= m.series.final_total() => Some(b),
                _ => Some(m),
            })
            .expect("non-empty report")
    }

    pub fn series_csv(&self) -> String {
        let mut out = String::from("method,t,r_trad,r_deg,r_total,r_clip\n");
        for m in &self.methods {
            let s = &m.series;
            for k in 0..s.len() {
                let _ = writeln!(out, "{},{},{},{},{},{}", m.method, k + 1, s.trad[k], s.deg[k], s.total[k], s.clip[k]);
            }
        }
        out
    }

    pub fn returns_csv(&self) -> String {
        let mut out = String::from("method,profile,r_trad,r_deg,r_total\n");
        for m in &self.methods {
            for (i, id) in m.profile_ids.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", m.method, id, m.trad_returns[i], m.deg_returns[i], m.returns[i]);
            }
        }
        out
    }

    /// Gaps of every method against the baseline; empty when the baseline
    /// was not evaluated.
    pub fn gaps_csv(&self) -> Result<String> {
        let mut out = String::from("method,baseline,t,gap_trad,gap_deg,gap_total\n");
        let Some(base) = self.method(&self.baseline) else {
            return Ok(out);
        };
        for m in &self.methods {
            let t = component_gap(&m.series, &base.series, Component::Trading)?;
            let d = component_gap(&m.series, &base.series, Component::Degradation)?;
            let g = component_gap(&m.series, &base.series, Component::Total)?;
            for k in 0..g.len() {
                let _ = writeln!(out, "{},{},{},{},{},{}", m.method, self.baseline, k + 1, t[k], d[k], g[k]);
            }
        }
        Ok(out)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut out = String::from("method,n,mean,min,q1,median,q3,max,final_trad,final_deg,final_total,mean_clip_w\n");
        for m in &self.methods {
            let f = five_number_summary(&m.returns)?;
            let s = &m.series;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                m.method,
                m.returns.len(),
                mean(&m.returns),
                f.min,
                f.q1,
                f.median,
                f.q3,
                f.max,
                s.trad.last().copied().unwrap_or(0.0),
                s.deg.last().copied().unwrap_or(0.0),
                s.final_total(),
                m.mean_clip_w
            );
        }
        Ok(out)
    }

    /// One-sided paired tests of `reference > other` for every other method,
    /// followed by the aggregated p-value. Empty when fewer than two
    /// profiles or no reference.
    pub fn ttests_csv(&self, reference: &str, rule: PAggregation) -> Result<String> {
        let mut out = String::from("method,against,t,p,mean_diff\n");
        let Some(r) = self.method(reference) else {
            return Ok(out);
        };
        if r.returns.len() < 2 {
            return Ok(out);
        }
        let mut ps = Vec::new();
        for m in self.methods.iter().filter(|m| m.method != reference) {
            let t = paired_t_test(&r.returns, &m.returns)?;
            ps.push(t.p);
            let _ = writeln!(out, "{},{},{},{},{}", reference, m.method, t.t, t.p, t.mean_diff);
        }
        if let Some(p) = aggregate_p(&ps, rule) {
            let label = match rule {
                PAggregation::Max => "all:max",
                PAggregation::Bonferroni => "all:bonferroni",
            };
            let _ = writeln!(out, "{reference},{label},,{p},");
        }
        Ok(out)
    }

    /// Writes `series.csv`, `returns.csv`, `gaps.csv`, `summary.csv` and
    /// `ttests.csv` into `dir`.
    pub fn write(&self, dir: &Path, reference: &str, rule: PAggregation) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("series.csv"), self.series_csv())?;
        fs::write(dir.join("returns.csv"), self.returns_csv())?;
        fs::write(dir.join("gaps.csv"), self.gaps_csv()?)?;
        fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        fs::write(dir.join("ttests.csv"), self.ttests_csv(reference, rule)?)?;
        Ok(())
    }
}
