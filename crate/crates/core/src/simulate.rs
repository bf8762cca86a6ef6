//! Synthetic joint-data generation: shared random effects, ALD or Gaussian
//! measurement errors, and event times drawn by inverse-transform on the
//! piecewise exp-linear cumulative hazard.

use crate::ald::{ald_quantile, QuantileLevel};
use crate::dist::{cholesky_lower, draw_std_normal};
use crate::model::{HazardGrid, JointDataset, LongitudinalRecord, SurvivalRecord};
use crate::rng::RngStream;
use crate::survival::exp_linear_integral;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Measurement-error family for simulated responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ErrorFamily {
    /// ε ~ N(0, σ²)
    Gaussian { sigma2: f64 },
    /// ε ~ ALD(0, σ², τ); the τ-quantile of ε is exactly 0.
    Ald { sigma2: f64, tau: f64 },
}

impl ErrorFamily {
    pub fn sigma2(&self) -> f64 {
        match self {
            ErrorFamily::Gaussian { sigma2 } | ErrorFamily::Ald { sigma2, .. } => *sigma2,
        }
    }
}

/// Two-point subject-level residual-scale mixture with a matching log-hazard
/// offset; the generator for quantile-dependent association patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heteroscedastic {
    /// Residual sd of the low-scale half of the cohort.
    pub sd_low: f64,
    /// Residual sd of the high-scale half.
    pub sd_high: f64,
    /// Log-hazard offset: +coef for high-scale subjects, −coef for low.
    pub hazard_coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimScenario {
    pub n_subjects: usize,
    /// Visits per subject (≥ 2); the first visit is pinned at t = 0.
    pub visits: usize,
    pub visit_spacing: f64,
    /// Uniform jitter half-applied around each scheduled visit after the first.
    pub visit_jitter: f64,
    /// Fixed effects [intercept, time slope].
    pub beta_l: Vec<f64>,
    /// Random-effects covariance, row-major 2×2.
    pub re_cov: [[f64; 2]; 2],
    pub error: ErrorFamily,
    pub alpha: f64,
    pub hazard_cuts: Vec<f64>,
    pub hazard_values: Vec<f64>,
    /// Log-hazard-ratio of a balanced binary baseline covariate "group",
    /// exported as a covariate column when set.
    pub beta_s: Option<f64>,
    /// Administrative censoring time.
    pub horizon: f64,
    /// Drop longitudinal records after the observed exit time.
    pub drop_after_exit: bool,
    pub heteroscedastic: Option<Heteroscedastic>,
}

impl Default for SimScenario {
    /// Desk-scale default: 300 subjects, 8 annual visits, shared random
    /// intercept + slope, symmetric-Laplace errors, α = −0.5.
    fn default() -> Self {
        SimScenario {
            n_subjects: 300,
            visits: 8,
            visit_spacing: 1.0,
            visit_jitter: 0.1,
            beta_l: vec![2.0, -0.3],
            re_cov: [[0.5, 0.05], [0.05, 0.04]],
            error: ErrorFamily::Ald {
                sigma2: 0.25,
                tau: 0.5,
            },
            alpha: -0.5,
            hazard_cuts: vec![0.0, 8.0],
            hazard_values: vec![0.12],
            beta_s: None,
            horizon: 8.0,
            drop_after_exit: false,
            heteroscedastic: None,
        }
    }
}

impl SimScenario {
    /// Scenario whose generating association changes sign across quantile
    /// levels: hazards rise with the subject's median level (positive α at
    /// τ = 0.5) but even more with the subject's residual scale, which drags
    /// the low quantiles down (negative association at τ = 0.1).
    pub fn quantile_flip() -> SimScenario {
        SimScenario {
            error: ErrorFamily::Gaussian { sigma2: 1.0 },
            alpha: 0.8,
            re_cov: [[0.5, 0.0], [0.0, 0.02]],
            heteroscedastic: Some(Heteroscedastic {
                sd_low: 0.2,
                sd_high: 1.5,
                hazard_coef: 1.5,
            }),
            hazard_values: vec![0.15],
            ..SimScenario::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.visits < 2 {
            return Err(Error::Config("simulation needs at least 2 visits".into()));
        }
        if self.n_subjects == 0 {
            return Err(Error::Config("n_subjects must be positive".into()));
        }
        if self.beta_l.len() != 2 {
            return Err(Error::Config(
                "beta_l must be [intercept, slope]".into(),
            ));
        }
        if !(self.error.sigma2() > 0.0) {
            return Err(Error::Config("error sigma2 must be positive".into()));
        }
        if let ErrorFamily::Ald { tau, .. } = self.error {
            QuantileLevel::new(tau)?;
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<HazardGrid> {
        HazardGrid::new(self.hazard_cuts.clone(), self.hazard_values.clone())
    }

    /// Stable content hash, recorded in manifests for reproducibility.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let ser = serde_json::to_string(self).expect("scenario serializes");
        let mut h = Sha256::new();
        h.update(ser.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Generating parameter values written alongside a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueValues {
    pub beta_l: Vec<f64>,
    pub sigma2: f64,
    pub re_cov: [[f64; 2]; 2],
    pub alpha: f64,
    pub hazard_cuts: Vec<f64>,
    pub hazard_values: Vec<f64>,
    pub beta_s: Option<f64>,
    /// Per-subject (γ₀ᵢ, γ₁ᵢ), subject order matching the sorted dataset.
    pub gamma: Vec<(f64, f64)>,
    /// Per-subject ±1 scale-group sign under a heteroscedastic scenario.
    pub group_sign: Option<Vec<i8>>,
}

/// Smallest t ≥ entry with ∫_entry^t λ₀(u)·e^{c0 + c1·u} du ≥ −log(u), or
/// `None` when the total hazard over the grid is exhausted first (censoring).
pub fn invert_hazard(u: f64, c0: f64, c1: f64, grid: &HazardGrid, entry: f64) -> Option<f64> {
    debug_assert!(u > 0.0 && u <= 1.0);
    let mut target = -u.ln();
    if target <= 0.0 {
        return Some(entry);
    }
    let front0 = c0.exp();
    for k in 0..grid.k() {
        let a = grid.cuts[k].max(entry);
        let b = grid.cuts[k + 1];
        if b <= a {
            continue;
        }
        let front = grid.values[k] * front0;
        let full = front * exp_linear_integral(c1, a, b);
        if full >= target {
            // front·e^{c1·a}·(e^{c1(t−a)} − 1)/c1 = target
            let base = front * (c1 * a).exp();
            let t = if c1.abs() < 1e-12 {
                a + target / base
            } else {
                a + (target * c1 / base).ln_1p() / c1
            };
            return Some(t.min(b));
        }
        target -= full;
    }
    None
}

fn draw_error(error: ErrorFamily, sd_scale: f64, rng: &mut RngStream) -> f64 {
    match error {
        ErrorFamily::Gaussian { sigma2 } => sigma2.sqrt() * sd_scale * draw_std_normal(rng),
        ErrorFamily::Ald { sigma2, tau } => {
            let level = QuantileLevel::new(tau).expect("validated");
            let p = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
            // scale the ALD linearly: quantiles are linear in the scale
            ald_quantile(p, 0.0, sigma2 * sd_scale, level)
        }
    }
}

/// Deterministic per (scenario, seed). Subjects are independent substreams.
pub fn simulate(scenario: &SimScenario, seed: u64) -> Result<(JointDataset, TrueValues)> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let root = RngStream::from_seed(seed);
    let re_chol = cholesky_lower(&nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[
            scenario.re_cov[0][0],
            scenario.re_cov[0][1],
            scenario.re_cov[1][0],
            scenario.re_cov[1][1],
        ],
    ))?;

    let mut long = Vec::new();
    let mut surv = Vec::new();
    let mut gammas = Vec::with_capacity(scenario.n_subjects);
    let mut signs = Vec::with_capacity(scenario.n_subjects);
    let covariate_names: Vec<String> = if scenario.beta_s.is_some() {
        vec!["group".into()]
    } else {
        vec![]
    };

    for i in 0..scenario.n_subjects {
        let mut rng = root.substream(i as u64);
        let id = format!("s{i:05}");

        let z = (draw_std_normal(&mut rng), draw_std_normal(&mut rng));
        let g0 = re_chol[(0, 0)] * z.0;
        let g1 = re_chol[(1, 0)] * z.0 + re_chol[(1, 1)] * z.1;
        gammas.push((g0, g1));

        let sign: i8 = if rng.gen::<f64>() < 0.5 { -1 } else { 1 };
        signs.push(sign);
        let (sd_scale, het_offset) = match scenario.heteroscedastic {
            Some(h) => {
                let sd = if sign < 0 { h.sd_low } else { h.sd_high };
                // scenario sigma2 acts as the unit; express sd as a multiplier
                (sd / scenario.error.sigma2().sqrt(), h.hazard_coef * sign as f64)
            }
            None => (1.0, 0.0),
        };

        let group = if scenario.beta_s.is_some() {
            (i % 2) as f64
        } else {
            0.0
        };
        let eta_s = scenario.beta_s.unwrap_or(0.0) * group + het_offset;

        // event time by inverse transform on the cumulative hazard
        let u = rng.gen::<f64>().clamp(1e-300, 1.0);
        let c0 = scenario.alpha * g0 + eta_s;
        let c1 = scenario.alpha * g1;
        let event_time = invert_hazard(u, c0, c1, &grid, 0.0);
        let (exit, event) = match event_time {
            Some(t) if t <= scenario.horizon => (t, true),
            _ => (scenario.horizon, false),
        };

        // visit schedule: first visit pinned at 0, later ones jittered
        let mut times = vec![0.0];
        for j in 1..scenario.visits {
            let jitter = scenario.visit_jitter * (rng.gen::<f64>() - 0.5);
            times.push((j as f64 * scenario.visit_spacing + jitter).max(0.0));
        }
        times.sort_by(|a, b| a.total_cmp(b));

        for &t in &times {
            if scenario.drop_after_exit && t > exit {
                continue;
            }
            let eps = draw_error(scenario.error, sd_scale, &mut rng);
            let y = scenario.beta_l[0] + scenario.beta_l[1] * t + g0 + g1 * t + eps;
            long.push(LongitudinalRecord {
                subject_id: id.clone(),
                time: t,
                response: y,
                covariates: if scenario.beta_s.is_some() {
                    vec![group]
                } else {
                    vec![]
                },
            });
        }
        surv.push(SurvivalRecord {
            subject_id: id,
            entry: 0.0,
            exit: exit.max(f64::MIN_POSITIVE),
            event,
        });
    }

    let truth = TrueValues {
        beta_l: scenario.beta_l.clone(),
        sigma2: scenario.error.sigma2(),
        re_cov: scenario.re_cov,
        alpha: scenario.alpha,
        hazard_cuts: scenario.hazard_cuts.clone(),
        hazard_values: scenario.hazard_values.clone(),
        beta_s: scenario.beta_s,
        gamma: gammas,
        group_sign: scenario.heteroscedastic.map(|_| signs),
    };
    let data = JointDataset::new(covariate_names, long, surv)?;
    Ok((data, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::ks_statistic;
    use crate::model::SubjectDesign;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn invert_hazard_trivial_cases() {
        let grid = HazardGrid::new(vec![0.0, 10.0], vec![0.4]).unwrap();
        // u = 1: zero target, event at entry
        assert_eq!(invert_hazard(1.0, 0.3, 0.1, &grid, 1.5), Some(1.5));
        // alpha = 0, constant baseline c: t = e + (−log u)/c
        let u = 0.37;
        let t = invert_hazard(u, 0.0, 0.0, &grid, 2.0).unwrap();
        assert_relative_eq!(t, 2.0 + (-u.ln()) / 0.4, max_relative = 1e-12);
        // hazard exhausted: censoring
        assert_eq!(invert_hazard(1e-300, 0.0, 0.0, &grid, 0.0), None);
    }

    #[test]
    fn invert_hazard_round_trip() {
        let grid =
            HazardGrid::new(vec![0.0, 1.0, 2.5, 6.0, 20.0], vec![0.3, 0.9, 0.2, 0.6]).unwrap();
        let mut rng = RngStream::from_seed(91);
        let mut checked = 0;
        for _ in 0..10_000 {
            let c0 = rng.gen::<f64>() - 0.5;
            let c1 = 0.4 * (rng.gen::<f64>() - 0.5);
            let entry = 3.0 * rng.gen::<f64>();
            let u = rng.gen::<f64>().max(1e-12);
            let Some(t) = invert_hazard(u, c0, c1, &grid, entry) else {
                continue;
            };
            let subj = SubjectDesign {
                id: "x".into(),
                rows: 0..1,
                times: vec![0.0],
                y: vec![0.0],
                z: DMatrix::zeros(1, 0),
                entry,
                exit: t.max(entry + 1e-308),
                event: true,
                x_s: nalgebra::DVector::zeros(0),
            };
            if t <= entry {
                continue;
            }
            let h =
                crate::survival::cumulative_hazard(&subj, &grid, 1.0, (c0, c1), 0.0).unwrap();
            let target = -u.ln();
            assert!(
                (h - target).abs() <= 1e-9 * target.abs().max(1e-12),
                "H = {h}, target = {target}"
            );
            checked += 1;
        }
        assert!(checked > 5_000);
    }

    #[test]
    fn event_times_exponential_under_constant_hazard() {
        // alpha = 0, constant baseline, enormous grid so nothing censors
        let c = 0.7;
        let scenario = SimScenario {
            n_subjects: 100_000,
            visits: 2,
            beta_l: vec![0.0, 0.0],
            re_cov: [[1e-12, 0.0], [0.0, 1e-12]],
            alpha: 0.0,
            hazard_cuts: vec![0.0, 1e6],
            hazard_values: vec![c],
            horizon: 1e6,
            ..SimScenario::default()
        };
        let (data, _) = simulate(&scenario, 92).unwrap();
        let mut exits: Vec<f64> = data
            .survival
            .iter()
            .filter(|s| s.event)
            .map(|s| s.exit)
            .collect();
        assert!(exits.len() > 99_000);
        exits.sort_by(|a, b| a.total_cmp(b));
        let ks = ks_statistic(&exits, |t| 1.0 - (-c * t).exp());
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn ald_errors_have_tau_negative_fraction() {
        let error = ErrorFamily::Ald {
            sigma2: 0.8,
            tau: 0.3,
        };
        let mut rng = RngStream::from_seed(93);
        let n = 1_000_000;
        let below = (0..n)
            .filter(|_| draw_error(error, 1.0, &mut rng) < 0.0)
            .count();
        let frac = below as f64 / n as f64;
        assert!((frac - 0.3).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn negative_alpha_orders_survival_by_intercept_sign() {
        // alpha = −0.4: subjects with lower γ₀ fail faster
        let scenario = SimScenario {
            n_subjects: 4_000,
            alpha: -0.4,
            re_cov: [[1.0, 0.0], [0.0, 1e-10]],
            hazard_values: vec![0.25],
            ..SimScenario::default()
        };
        let (data, truth) = simulate(&scenario, 94).unwrap();
        let mut event_rate = [0.0f64; 2];
        let mut count = [0.0f64; 2];
        for (s, g) in data.survival.iter().zip(&truth.gamma) {
            let side = usize::from(g.0 >= 0.0);
            count[side] += 1.0;
            if s.event {
                event_rate[side] += 1.0;
            }
        }
        let low = event_rate[0] / count[0];
        let high = event_rate[1] / count[1];
        assert!(
            low > high + 0.05,
            "negative-intercept event rate {low} vs {high}"
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let scenario = SimScenario {
            n_subjects: 50,
            ..SimScenario::default()
        };
        let a = simulate(&scenario, 95).unwrap();
        let b = simulate(&scenario, 95).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = simulate(&scenario, 96).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn drop_after_exit_keeps_baseline_record() {
        let scenario = SimScenario {
            n_subjects: 200,
            drop_after_exit: true,
            hazard_values: vec![2.0], // fast events
            ..SimScenario::default()
        };
        let (data, _) = simulate(&scenario, 97).unwrap();
        assert_eq!(data.n_subjects(), 200);
        for s in &data.survival {
            let times: Vec<f64> = data
                .longitudinal
                .iter()
                .filter(|r| r.subject_id == s.subject_id)
                .map(|r| r.time)
                .collect();
            assert!(!times.is_empty());
            assert!(times.iter().all(|&t| t <= s.exit || t == 0.0));
        }
    }

    #[test]
    fn group_covariate_emitted_with_beta_s() {
        let scenario = SimScenario {
            n_subjects: 20,
            beta_s: Some(0.5),
            ..SimScenario::default()
        };
        let (data, truth) = simulate(&scenario, 98).unwrap();
        assert_eq!(data.covariate_names, vec!["group".to_string()]);
        assert_eq!(truth.beta_s, Some(0.5));
        assert!(data
            .longitudinal
            .iter()
            .all(|r| r.covariates[0] == 0.0 || r.covariates[0] == 1.0));
    }

    #[test]
    fn scenario_hash_sensitive() {
        let a = SimScenario::default();
        let mut b = SimScenario::default();
        assert_eq!(a.hash(), b.hash());
        b.alpha = 0.1;
        assert_ne!(a.hash(), b.hash());
    }
}
