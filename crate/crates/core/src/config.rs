//! Run configuration: a TOML file selecting the fit mode, data paths and
//! model settings, with CLI flag overrides applied on top.

use crate::model::{
    read_longitudinal_csv, read_survival_csv, JointDataset, ModelSpec, SurvivalRecord,
};
use crate::simulate::SimScenario;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LongQuantile,
    MeanJoint,
    QuantileJoint,
    Simulate,
}

impl Mode {
    pub fn is_joint(&self) -> bool {
        matches!(self, Mode::MeanJoint | Mode::QuantileJoint)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::LongQuantile => "long-quantile",
            Mode::MeanJoint => "mean-joint",
            Mode::QuantileJoint => "quantile-joint",
            Mode::Simulate => "simulate",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "long-quantile" => Ok(Mode::LongQuantile),
            "mean-joint" => Ok(Mode::MeanJoint),
            "quantile-joint" => Ok(Mode::QuantileJoint),
            "simulate" => Ok(Mode::Simulate),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected long-quantile, mean-joint, quantile-joint or simulate"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    pub longitudinal_csv: Option<PathBuf>,
    pub survival_csv: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Worker threads for parallel sections; 0 keeps the library default.
    pub jobs: usize,
    pub model: ModelSpec,
    /// Simulation scenario; only read in simulate mode.
    pub scenario: SimScenario,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::MeanJoint,
            longitudinal_csv: None,
            survival_csv: None,
            output_dir: PathBuf::from("out"),
            jobs: 0,
            model: ModelSpec::default(),
            scenario: SimScenario::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Check mode-required inputs and the embedded model spec.
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Simulate => self.scenario.validate(),
            mode => {
                if self.longitudinal_csv.is_none() {
                    return Err(Error::Config(
                        "missing input: longitudinal_csv is required for fitting".into(),
                    ));
                }
                if mode.is_joint() && self.survival_csv.is_none() {
                    return Err(Error::Config(
                        "missing input: survival_csv is required in joint modes".into(),
                    ));
                }
                if matches!(mode, Mode::LongQuantile | Mode::QuantileJoint)
                    && self.model.tau_levels.is_empty()
                {
                    return Err(Error::Config(
                        "quantile modes need at least one tau level".into(),
                    ));
                }
                self.model.validate(mode.is_joint())
            }
        }
    }

    /// Stable content hash recorded in run manifests.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let ser = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(ser.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Read the input CSVs into a validated dataset. In longitudinal-only
    /// mode a missing survival file is allowed: censored placeholder rows
    /// covering each subject's observation window are synthesized.
    pub fn load_dataset(&self) -> Result<JointDataset> {
        let long_path = self.longitudinal_csv.as_ref().ok_or_else(|| {
            Error::Config("missing input: longitudinal_csv".into())
        })?;
        let (names, long) = read_longitudinal_csv(long_path)?;
        let survival = match (&self.survival_csv, self.mode) {
            (Some(path), _) => read_survival_csv(path)?,
            (None, Mode::LongQuantile) => synthesize_survival(&long),
            (None, _) => {
                return Err(Error::Config(
                    "missing input: survival_csv is required in joint modes".into(),
                ))
            }
        };
        JointDataset::new(names, long, survival)
    }
}

/// Censored one-row-per-subject survival stand-ins for longitudinal-only
/// fits without event data.
fn synthesize_survival(long: &[crate::model::LongitudinalRecord]) -> Vec<SurvivalRecord> {
    use std::collections::BTreeMap;
    let mut windows: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for r in long {
        let w = windows
            .entry(r.subject_id.as_str())
            .or_insert((r.time, r.time));
        w.0 = w.0.min(r.time);
        w.1 = w.1.max(r.time);
    }
    windows
        .into_iter()
        .map(|(id, (lo, hi))| SurvivalRecord {
            subject_id: id.to_string(),
            entry: lo,
            exit: hi.max(lo) + 1.0,
            event: false,
        })
        .collect()
}
