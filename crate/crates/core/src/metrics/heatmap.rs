//! Joint histogram of chosen actions against demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell label for empty bins in CSV output.
pub const EMPTY_CELL: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDemandHistogram {
    /// `action_bins + 1` edges over [0, 1].
    pub action_edges: Vec<f64>,
    /// `demand_bins + 1` edges over the observed demand range, in W.
    pub demand_edges: Vec<f64>,
    /// `counts[demand_bin][action_bin]`.
    pub counts: Vec<Vec<u64>>,
}

fn bin_of(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let f = ((x - lo) / (hi - lo) * bins as f64).floor();
    (f.max(0.0) as usize).min(bins - 1)
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Bins `(action, demand)` pairs. Actions outside [0, 1] fall in the edge
/// bins; the demand axis spans the observed range.
pub fn action_demand_histogram(
    samples: &[(f64, f64)],
    action_bins: usize,
    demand_bins: usize,
) -> Result<ActionDemandHistogram> {
    if action_bins == 0 || demand_bins == 0 {
        return Err(Error::domain("histogram needs at least one bin per axis"));
    }
    if samples.iter().any(|(a, d)| !a.is_finite() || !d.is_finite()) {
        return Err(Error::domain("histogram samples must be finite"));
    }
    let (mut lo, mut hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, d)| (lo.min(d), hi.max(d)));
    if samples.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if hi <= lo {
        hi = lo + 1.0;
    }
    let mut counts = vec![vec![0u64; action_bins]; demand_bins];
    for &(a, d) in samples {
        counts[bin_of(d, lo, hi, demand_bins)][bin_of(a, 0.0, 1.0, action_bins)] += 1;
    }
    Ok(ActionDemandHistogram {
        action_edges: edges(0.0, 1.0, action_bins),
        demand_edges: edges(lo, hi, demand_bins),
        counts,
    })
}

impl ActionDemandHistogram {
    /// `ln(count)` per cell; `None` for empty cells.
    pub fn log_counts(&self) -> Vec<Vec<Option<f64>>> {
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| (c > 0).then(|| (c as f64).ln())).collect())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Grid with one row per demand bin; columns are the action bins.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("demand_lo_w,demand_hi_w");
        for w in self.action_edges.windows(2) {
            out.push_str(&format!(",a_{}_{}", w[0], w[1]));
        }
        out.push('\n');
        for (row, w) in self.log_counts().iter().zip(self.demand_edges.windows(2)) {
            out.push_str(&format!("{},{}", w[0], w[1]));
            for cell in row {
                match cell {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push_str(&format!(",{EMPTY_CELL}")),
                }
            }
            out.push('\n');
        }
        out
    }
}
