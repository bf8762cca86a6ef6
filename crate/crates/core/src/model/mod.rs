//! Data model shared by all fit modes: longitudinal and survival records,
//! the model specification, priors, design-matrix assembly and the baseline
//! hazard grid.

mod csv_io;
mod design;
mod hazard;

pub use csv_io::{read_longitudinal_csv, read_survival_csv, write_longitudinal_csv, write_survival_csv};
pub use design::{build_designs, DesignBundle, SubjectDesign};
pub use hazard::{default_grid, HazardGrid};

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Pseudo-covariate name that maps to the measurement time column.
pub const TIME_COVARIATE: &str = "time";

#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalRecord {
    pub subject_id: String,
    pub time: f64,
    pub response: f64,
    /// Aligned with [`JointDataset::covariate_names`].
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub subject_id: String,
    pub entry: f64,
    pub exit: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDataset {
    pub covariate_names: Vec<String>,
    pub longitudinal: Vec<LongitudinalRecord>,
    pub survival: Vec<SurvivalRecord>,
}

impl JointDataset {
    /// Validate and canonicalize: subjects sorted by id, records sorted by
    /// time within subject, one survival row per subject, ids matched both
    /// ways.
    pub fn new(
        covariate_names: Vec<String>,
        mut longitudinal: Vec<LongitudinalRecord>,
        mut survival: Vec<SurvivalRecord>,
    ) -> Result<JointDataset> {
        if longitudinal.is_empty() {
            return Err(Error::Data("no longitudinal records".into()));
        }
        for r in &longitudinal {
            if !r.time.is_finite() || !r.response.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite time or response for subject {}",
                    r.subject_id
                )));
            }
            if r.covariates.len() != covariate_names.len() {
                return Err(Error::Data(format!(
                    "subject {}: {} covariate values, expected {}",
                    r.subject_id,
                    r.covariates.len(),
                    covariate_names.len()
                )));
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "missing or non-finite covariate value for subject {}",
                    r.subject_id
                )));
            }
        }
        survival.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        for w in survival.windows(2) {
            if w[0].subject_id == w[1].subject_id {
                return Err(Error::Data(format!(
                    "duplicate survival row for subject {}",
                    w[0].subject_id
                )));
            }
        }
        for s in &survival {
            if !(s.entry < s.exit) {
                return Err(Error::Data(format!(
                    "subject {}: entry {} must precede exit {}",
                    s.subject_id, s.entry, s.exit
                )));
            }
        }
        longitudinal.sort_by(|a, b| {
            a.subject_id
                .cmp(&b.subject_id)
                .then(a.time.total_cmp(&b.time))
        });
        let mut long_ids: Vec<&str> = longitudinal.iter().map(|r| r.subject_id.as_str()).collect();
        long_ids.dedup();
        let surv_ids: Vec<&str> = survival.iter().map(|r| r.subject_id.as_str()).collect();
        if long_ids != surv_ids {
            let missing_surv: Vec<&&str> =
                long_ids.iter().filter(|id| !surv_ids.contains(id)).collect();
            let missing_long: Vec<&&str> =
                surv_ids.iter().filter(|id| !long_ids.contains(id)).collect();
            return Err(Error::Data(format!(
                "subject mismatch: {missing_surv:?} lack survival rows, {missing_long:?} lack longitudinal rows"
            )));
        }
        Ok(JointDataset {
            covariate_names,
            longitudinal,
            survival,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.survival.len()
    }
}

/// Which random effects enter the shared predictor η_ls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedEffects {
    pub intercept: bool,
    pub slope: bool,
}

impl Default for SharedEffects {
    fn default() -> Self {
        SharedEffects {
            intercept: true,
            slope: true,
        }
    }
}

impl SharedEffects {
    pub fn dim(&self) -> usize {
        self.intercept as usize + self.slope as usize
    }
}

/// Prior hyperparameters. Vector-valued priors are diagonal expansions of
/// these scalars; see [`PriorSpec::beta_mean_vec`] and friends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// Gaussian prior mean for each fixed-effect coefficient.
    pub beta_mean: f64,
    /// Gaussian prior variance for each fixed-effect coefficient.
    pub beta_var: f64,
    /// Inverse-gamma (a₀, b₀) for the model variance σ².
    pub sigma2_a: f64,
    pub sigma2_b: f64,
    /// Gamma (a₀, b₀) for each baseline hazard piece λ_k.
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// Gaussian prior for the association parameter α.
    pub alpha_mean: f64,
    pub alpha_var: f64,
    /// Inverse-Wishart (ν, S = scale·I) for the random-effects covariance.
    pub re_df: f64,
    pub re_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            beta_mean: 0.0,
            beta_var: 1.0e4,
            sigma2_a: 0.01,
            sigma2_b: 0.01,
            lambda_a: 0.01,
            lambda_b: 0.01,
            alpha_mean: 0.0,
            alpha_var: 10.0,
            re_df: 4.0,
            re_scale: 1.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let positive: &[(&str, f64)] = &[
            ("beta_var", self.beta_var),
            ("sigma2_a", self.sigma2_a),
            ("sigma2_b", self.sigma2_b),
            ("lambda_a", self.lambda_a),
            ("lambda_b", self.lambda_b),
            ("alpha_var", self.alpha_var),
            ("re_scale", self.re_scale),
        ];
        for (name, v) in positive {
            if !(*v > 0.0) {
                return Err(Error::Config(format!("prior {name} = {v}, must be > 0")));
            }
        }
        if !(self.re_df > 1.0) {
            return Err(Error::Config(format!(
                "prior re_df = {}, must exceed 1",
                self.re_df
            )));
        }
        Ok(())
    }

    /// Diagonal expansion of the scalar coefficient prior to dimension p.
    pub fn beta_prior(&self, p: usize) -> (DVector<f64>, DMatrix<f64>) {
        (
            DVector::from_element(p, self.beta_mean),
            DMatrix::identity(p, p) * self.beta_var,
        )
    }

    /// Inverse-Wishart scale matrix scale·I at dimension q.
    pub fn re_scale_matrix(&self, q: usize) -> DMatrix<f64> {
        DMatrix::identity(q, q) * self.re_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub chain_length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            chain_length: 10_000,
            burn_in: 1_000,
            thin: 9,
            seed: 1,
        }
    }
}

impl McmcSettings {
    pub fn stored_draws(&self) -> usize {
        if self.chain_length <= self.burn_in {
            return 0;
        }
        (self.chain_length - self.burn_in) / self.thin.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// Quantile levels to fit; empty means mean-regression mode.
    pub tau_levels: Vec<f64>,
    /// Covariates in the longitudinal fixed part η_l, besides the intercept.
    /// The name "time" maps to the measurement time.
    pub l_covariates: Vec<String>,
    /// Baseline-constant covariates in the survival part η_s.
    pub s_covariates: Vec<String>,
    pub shared_effects: SharedEffects,
    pub priors: PriorSpec,
    /// Number of baseline-hazard intervals.
    pub grid_k: usize,
    pub mcmc: McmcSettings,
    /// Keep per-subject random-effect draws in the posterior sample.
    pub store_random_effects: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            tau_levels: Vec::new(),
            l_covariates: vec![TIME_COVARIATE.to_string()],
            s_covariates: Vec::new(),
            shared_effects: SharedEffects::default(),
            priors: PriorSpec::default(),
            grid_k: 10,
            mcmc: McmcSettings::default(),
            store_random_effects: false,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self, joint_mode: bool) -> Result<()> {
        self.priors.validate()?;
        for &tau in &self.tau_levels {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::Config(format!("tau = {tau} outside (0, 1)")));
            }
        }
        if joint_mode && self.shared_effects.dim() == 0 {
            return Err(Error::Config(
                "joint modes need at least one shared random effect".into(),
            ));
        }
        if self.grid_k == 0 {
            return Err(Error::Config("grid_k must be positive".into()));
        }
        if self.mcmc.thin == 0 {
            return Err(Error::Config("thin must be positive".into()));
        }
        if self.mcmc.burn_in >= self.mcmc.chain_length {
            return Err(Error::Config(
                "burn_in must be smaller than chain_length".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash over the serialized spec, recorded in run manifests.
    pub fn spec_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let ser = serde_json::to_string(&OrderedSpec::from(self)).expect("spec serializes");
        let mut h = Sha256::new();
        h.update(ser.as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Serialization proxy with deterministic key order for hashing.
#[derive(Serialize)]
struct OrderedSpec(BTreeMap<String, serde_json::Value>);

impl From<&ModelSpec> for OrderedSpec {
    fn from(spec: &ModelSpec) -> Self {
        let v = serde_json::to_value(spec).expect("spec serializes");
        let map = match v {
            serde_json::Value::Object(m) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        OrderedSpec(map)
    }
}
