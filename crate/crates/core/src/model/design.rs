//! Design-matrix assembly.

use super::{JointDataset, ModelSpec, TIME_COVARIATE};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Per-subject view of the data with its shared-effect design and survival
/// row.
#[derive(Debug, Clone)]
pub struct SubjectDesign {
    pub id: String,
    /// Row indices of this subject inside the stacked arrays.
    pub rows: std::ops::Range<usize>,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    /// J_i × q shared random-effects design (columns per enabled flag,
    /// intercept then slope).
    pub z: DMatrix<f64>,
    pub entry: f64,
    pub exit: f64,
    pub event: bool,
    /// Baseline survival covariates (constant over the subject's records).
    pub x_s: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct DesignBundle {
    /// Stacked N × p_l longitudinal fixed-effects design (intercept first).
    pub x_l: DMatrix<f64>,
    /// Stacked responses.
    pub y: DVector<f64>,
    pub subjects: Vec<SubjectDesign>,
    /// subject index for every stacked row
    pub subject_of_record: Vec<usize>,
    pub shared: super::SharedEffects,
    pub l_names: Vec<String>,
    pub s_names: Vec<String>,
}

impl DesignBundle {
    pub fn n_records(&self) -> usize {
        self.y.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn p_l(&self) -> usize {
        self.x_l.ncols()
    }

    pub fn q(&self) -> usize {
        self.subjects.first().map_or(0, |s| s.z.ncols())
    }

    pub fn p_s(&self) -> usize {
        self.subjects.first().map_or(0, |s| s.x_s.len())
    }

    /// Shared predictor η_ls(t) for one subject, restricted to the enabled
    /// flags. `gamma` has one entry per enabled flag, intercept first.
    pub fn eta_ls_at(&self, gamma: &[f64], t: f64) -> f64 {
        let mut v = 0.0;
        let mut k = 0;
        if self.shared.intercept {
            v += gamma[k];
            k += 1;
        }
        if self.shared.slope {
            v += gamma[k] * t;
        }
        v
    }

    /// (intercept, slope) pair of the shared predictor as a linear function
    /// of time, zero-filled for disabled flags.
    pub fn eta_ls_line(&self, gamma: &[f64]) -> (f64, f64) {
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        let mut k = 0;
        if self.shared.intercept {
            g0 = gamma[k];
            k += 1;
        }
        if self.shared.slope {
            g1 = gamma[k];
        }
        (g0, g1)
    }
}

fn covariate_column(
    data: &JointDataset,
    name: &str,
) -> Result<Vec<f64>> {
    if name == TIME_COVARIATE {
        return Ok(data.longitudinal.iter().map(|r| r.time).collect());
    }
    let idx = data
        .covariate_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Data(format!("unknown covariate {name:?}")))?;
    Ok(data
        .longitudinal
        .iter()
        .map(|r| r.covariates[idx])
        .collect())
}

/// Assemble the fixed, shared and survival designs for a validated dataset.
///
/// The longitudinal design always carries a leading intercept column; the
/// shared design per subject has a ones column and/or a time column per the
/// enabled flags; survival covariates are taken from each subject's records
/// and must be constant within subject.
pub fn build_designs(data: &JointDataset, spec: &ModelSpec) -> Result<DesignBundle> {
    let n_rec = data.longitudinal.len();
    let p_l = 1 + spec.l_covariates.len();
    let mut x_l = DMatrix::<f64>::zeros(n_rec, p_l);
    x_l.column_mut(0).fill(1.0);
    for (j, name) in spec.l_covariates.iter().enumerate() {
        let col = covariate_column(data, name)?;
        for (i, v) in col.iter().enumerate() {
            x_l[(i, j + 1)] = *v;
        }
    }
    let y = DVector::from_iterator(n_rec, data.longitudinal.iter().map(|r| r.response));

    let s_idx: Vec<usize> = spec
        .s_covariates
        .iter()
        .map(|name| {
            data.covariate_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Data(format!("unknown survival covariate {name:?}")))
        })
        .collect::<Result<_>>()?;

    let mut subjects = Vec::with_capacity(data.n_subjects());
    let mut subject_of_record = vec![0usize; n_rec];
    let mut row = 0usize;
    for surv in &data.survival {
        let start = row;
        while row < n_rec && data.longitudinal[row].subject_id == surv.subject_id {
            row += 1;
        }
        let recs = &data.longitudinal[start..row];
        if recs.is_empty() {
            return Err(Error::Data(format!(
                "subject {} has no longitudinal records",
                surv.subject_id
            )));
        }
        for r in subject_of_record.iter_mut().take(row).skip(start) {
            *r = subjects.len();
        }
        let times: Vec<f64> = recs.iter().map(|r| r.time).collect();
        let q = spec.shared_effects.dim();
        let mut z = DMatrix::<f64>::zeros(recs.len(), q);
        let mut col = 0;
        if spec.shared_effects.intercept {
            z.column_mut(col).fill(1.0);
            col += 1;
        }
        if spec.shared_effects.slope {
            for (i, t) in times.iter().enumerate() {
                z[(i, col)] = *t;
            }
        }
        let mut x_s = DVector::<f64>::zeros(s_idx.len());
        for (j, &ci) in s_idx.iter().enumerate() {
            let v = recs[0].covariates[ci];
            if recs.iter().any(|r| r.covariates[ci] != v) {
                return Err(Error::Data(format!(
                    "survival covariate {:?} varies within subject {}; baseline constants required",
                    spec.s_covariates[j], surv.subject_id
                )));
            }
            x_s[j] = v;
        }
        subjects.push(SubjectDesign {
            id: surv.subject_id.clone(),
            rows: start..row,
            times,
            y: recs.iter().map(|r| r.response).collect(),
            z,
            entry: surv.entry,
            exit: surv.exit,
            event: surv.event,
            x_s,
        });
    }

    Ok(DesignBundle {
        x_l,
        y,
        subjects,
        subject_of_record,
        shared: spec.shared_effects,
        l_names: std::iter::once("intercept".to_string())
            .chain(spec.l_covariates.iter().cloned())
            .collect(),
        s_names: spec.s_covariates.clone(),
    })
}
