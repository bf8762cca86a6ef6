//! Piecewise-constant baseline hazard grid.

use super::JointDataset;
use crate::{Error, Result};

/// Ordered cut points t_0 < … < t_K with constant hazard values λ_1…λ_K,
/// λ_k applying on (t_{k−1}, t_k].
#[derive(Debug, Clone, PartialEq)]
pub struct HazardGrid {
    pub cuts: Vec<f64>,
    pub values: Vec<f64>,
}

impl HazardGrid {
    pub fn new(cuts: Vec<f64>, values: Vec<f64>) -> Result<HazardGrid> {
        if cuts.len() != values.len() + 1 {
            return Err(Error::Data(format!(
                "hazard grid: {} cuts require {} values, got {}",
                cuts.len(),
                cuts.len() - 1,
                values.len()
            )));
        }
        if cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Data("hazard grid cuts must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Data("hazard values must be strictly positive".into()));
        }
        Ok(HazardGrid { cuts, values })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn start(&self) -> f64 {
        self.cuts[0]
    }

    pub fn end(&self) -> f64 {
        *self.cuts.last().unwrap()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Index of the interval containing t, with t_0 assigned to interval 0.
    pub fn interval_of(&self, t: f64) -> Option<usize> {
        if !self.contains(t) {
            return None;
        }
        let k = self.cuts.partition_point(|&c| c < t);
        Some(k.saturating_sub(1).min(self.k() - 1))
    }

    /// Baseline hazard value at t.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.interval_of(t).map(|k| self.values[k])
    }
}

/// Grid with cuts at empirical quantiles of observed event times, extended
/// to cover [min entry, max exit]. Initial values are 1.
pub fn default_grid(data: &JointDataset, k: usize) -> Result<HazardGrid> {
    if k == 0 {
        return Err(Error::Data("grid size must be positive".into()));
    }
    let mut events: Vec<f64> = data
        .survival
        .iter()
        .filter(|s| s.event)
        .map(|s| s.exit)
        .collect();
    if events.is_empty() {
        return Err(Error::Data(
            "no observed events: baseline hazard is unidentifiable".into(),
        ));
    }
    events.sort_by(|a, b| a.total_cmp(b));
    let t0 = data
        .survival
        .iter()
        .map(|s| s.entry)
        .fold(f64::INFINITY, f64::min);
    let t_end = data
        .survival
        .iter()
        .map(|s| s.exit)
        .fold(f64::NEG_INFINITY, f64::max);

    let k = k.min(events.len());
    let mut cuts = vec![t0];
    let n_ev = events.len();
    for i in 1..k {
        // boundary between the i-th and (i+1)-th equal-count block, placed
        // halfway between the straddling order statistics
        let j = (i * n_ev) / k;
        let c = if j == 0 {
            events[0]
        } else if j >= n_ev {
            events[n_ev - 1]
        } else {
            0.5 * (events[j - 1] + events[j])
        };
        if c > *cuts.last().unwrap() && c < t_end {
            cuts.push(c);
        }
    }
    cuts.push(t_end.max(t0 + f64::EPSILON.max(1e-9 * t0.abs())));
    let n_vals = cuts.len() - 1;
    HazardGrid::new(cuts, vec![1.0; n_vals])
}
