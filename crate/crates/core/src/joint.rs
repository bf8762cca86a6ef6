//! Full Gibbs orchestrator for the three fit modes, plus the survival-aware
//! random-effect and association updates that tie the submodels together.

use crate::ald::QuantileLevel;
use crate::dist::{ars_sample, bracket_mode, spd_inverse, LogConcave};
use crate::exec::map_indexed;
use crate::longitudinal::{
    eta_l_vector, eta_ls_vector, update_beta_l, update_random_effects_longonly, update_re_cov,
    update_sigma2, update_weights, LongState,
};
use crate::model::{build_designs, default_grid, DesignBundle, HazardGrid, JointDataset, ModelSpec};
use crate::rng::RngStream;
use crate::survival::{
    exp_linear_integral, exp_linear_moment, update_beta_s, update_lambda, SurvState,
};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use std::collections::BTreeMap;

/// Which of the three fit modes a chain runs in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMode {
    /// Quantile mixed model without the survival submodel.
    LongQuantile(QuantileLevel),
    /// Gaussian joint model (mean regression).
    MeanJoint,
    /// ALD-mixture joint model at one quantile level.
    QuantileJoint(QuantileLevel),
}

impl FitMode {
    pub fn level(&self) -> QuantileLevel {
        match self {
            FitMode::LongQuantile(l) | FitMode::QuantileJoint(l) => *l,
            FitMode::MeanJoint => QuantileLevel::mean_mode(),
        }
    }

    pub fn is_joint(&self) -> bool {
        !matches!(self, FitMode::LongQuantile(_))
    }

    pub fn is_quantile(&self) -> bool {
        !matches!(self, FitMode::MeanJoint)
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            FitMode::LongQuantile(l) | FitMode::QuantileJoint(l) => Some(l.tau),
            FitMode::MeanJoint => None,
        }
    }
}

/// Joint sampler state: longitudinal block plus survival block.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub long: LongState,
    pub surv: SurvState,
    pub iteration: usize,
}

/// Stored, thinned draws keyed by parameter name, with run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub draws: BTreeMap<String, Vec<f64>>,
    pub tau: Option<f64>,
    pub seed: u64,
    pub spec_hash: String,
}

impl PosteriorSample {
    pub fn empty(tau: Option<f64>, seed: u64, spec_hash: String) -> PosteriorSample {
        PosteriorSample {
            draws: BTreeMap::new(),
            tau,
            seed,
            spec_hash,
        }
    }

    pub fn n_draws(&self) -> usize {
        self.draws.values().next().map_or(0, Vec::len)
    }
}

// Gibbs block tags for substream derivation; fixed so that a block's random
// input does not depend on which optional blocks run around it.
const BLOCK_BETA_L: u64 = 0;
const BLOCK_GAMMA: u64 = 1;
const BLOCK_WEIGHTS: u64 = 2;
const BLOCK_SIGMA2: u64 = 3;
const BLOCK_RE_COV: u64 = 4;
const BLOCK_LAMBDA: u64 = 5;
const BLOCK_BETA_S: u64 = 6;
const BLOCK_ALPHA: u64 = 7;

/// Cumulative-hazard dependence on the scalar being sampled.
enum HazTerm {
    /// H(g) = scale·exp(coef·g); intercept coordinates.
    Scaled { scale: f64, coef: f64 },
    /// H(g) = front·Σ λ_k ∫ exp(α·g·u) du; slope coordinates.
    Integral {
        front: f64,
        alpha: f64,
        pieces: Vec<(f64, f64, f64)>,
    },
}

impl HazTerm {
    fn value(&self, g: f64) -> f64 {
        match self {
            HazTerm::Scaled { scale, coef } => scale * (coef * g).exp(),
            HazTerm::Integral {
                front,
                alpha,
                pieces,
            } => {
                front
                    * pieces
                        .iter()
                        .map(|&(lam, a, b)| lam * exp_linear_integral(alpha * g, a, b))
                        .sum::<f64>()
            }
        }
    }

    fn deriv(&self, g: f64) -> f64 {
        match self {
            HazTerm::Scaled { scale, coef } => coef * scale * (coef * g).exp(),
            HazTerm::Integral {
                front,
                alpha,
                pieces,
            } => {
                front
                    * alpha
                    * pieces
                        .iter()
                        .map(|&(lam, a, b)| lam * exp_linear_moment(alpha * g, a, b))
                        .sum::<f64>()
            }
        }
    }
}

/// One random-effect coordinate's log full conditional: Gaussian conditional
/// prior + Gaussian longitudinal quadratic + linear event term − cumulative
/// hazard. Concave: quadratic + linear − positive·convex-exp.
struct GammaCoordinate {
    prior_mean: f64,
    prior_var: f64,
    quad_a: f64,
    lin: f64,
    haz: HazTerm,
}

impl LogConcave for GammaCoordinate {
    fn log_density(&self, g: f64) -> f64 {
        let d = g - self.prior_mean;
        -0.5 * d * d / self.prior_var - self.quad_a * g * g + self.lin * g - self.haz.value(g)
    }

    fn log_density_deriv(&self, g: f64) -> Option<f64> {
        Some(
            -(g - self.prior_mean) / self.prior_var - 2.0 * self.quad_a * g + self.lin
                - self.haz.deriv(g),
        )
    }
}

/// Overlap pieces (λ_k, a, b) of a subject's risk window with the grid.
fn overlap_pieces(subject: &crate::model::SubjectDesign, grid: &HazardGrid) -> Vec<(f64, f64, f64)> {
    let mut pieces = Vec::new();
    for k in 0..grid.k() {
        let a = grid.cuts[k].max(subject.entry);
        let b = grid.cuts[k + 1].min(subject.exit);
        if b > a {
            pieces.push((grid.values[k], a, b));
        }
    }
    pieces
}

/// Joint-mode random-effects update: per subject, coordinate-wise ARS draws
/// of γ₀ᵢ then γ₁ᵢ. Deterministic per (block_rng, subject).
pub fn update_shared_effects(
    designs: &DesignBundle,
    long: &LongState,
    level: QuantileLevel,
    surv: &SurvState,
    block_rng: &RngStream,
) -> Result<DMatrix<f64>> {
    let q = designs.q();
    let prior_precision = spd_inverse(&long.re_cov)?;
    let eta_l = eta_l_vector(designs, &long.beta_l);
    let denom_base = long.sigma2 * level.phi;

    let draws: Vec<Result<Vec<f64>>> = map_indexed(designs.n_subjects(), |si| {
        let subj = &designs.subjects[si];
        let mut rng = block_rng.substream(si as u64);
        let mut g: Vec<f64> = (0..q).map(|c| long.gamma[(si, c)]).collect();
        let eta_s = surv.eta_s(subj);
        let pieces = overlap_pieces(subj, &surv.grid);
        for c in 0..q {
            let is_slope = if designs.shared.intercept {
                c == 1
            } else {
                designs.shared.slope
            };
            // conditional prior of coordinate c given the other (prior mean 0)
            let pjj = prior_precision[(c, c)];
            let mut shift = 0.0;
            for k in 0..q {
                if k != c {
                    shift += prior_precision[(c, k)] * g[k];
                }
            }
            let prior_mean = -shift / pjj;
            let prior_var = 1.0 / pjj;

            // longitudinal quadratic: −quad_a·g² + lin_b·g up to a constant
            let mut quad_a = 0.0;
            let mut lin = 0.0;
            for (local, rec) in subj.rows.clone().enumerate() {
                let w = long.weights[rec];
                let d = 1.0 / (denom_base * w);
                let zc = subj.z[(local, c)];
                let mut other = 0.0;
                for k in 0..q {
                    if k != c {
                        other += subj.z[(local, k)] * g[k];
                    }
                }
                let r = designs.y[subj.rows.start + local] - eta_l[rec] - level.xi * w - other;
                quad_a += 0.5 * zc * zc * d;
                lin += zc * r * d;
            }

            // survival: linear event term and the hazard integral in g
            if subj.event {
                lin += surv.alpha * if is_slope { subj.exit } else { 1.0 };
            }
            let (g0, g1) = designs.eta_ls_line(&g);
            let haz = if is_slope {
                HazTerm::Integral {
                    front: (surv.alpha * g0 + eta_s).exp(),
                    alpha: surv.alpha,
                    pieces: pieces.clone(),
                }
            } else {
                let c1 = surv.alpha * g1;
                let sum: f64 = pieces
                    .iter()
                    .map(|&(lam, a, b)| lam * exp_linear_integral(c1, a, b))
                    .sum();
                HazTerm::Scaled {
                    scale: eta_s.exp() * sum,
                    coef: surv.alpha,
                }
            };
            let target = GammaCoordinate {
                prior_mean,
                prior_var,
                quad_a,
                lin,
                haz,
            };
            let precision = 1.0 / prior_var + 2.0 * quad_a;
            let step = (1.0 / precision.sqrt()).clamp(1e-3, 2.0);
            let init = bracket_mode(&target, g[c], step)?;
            g[c] = ars_sample(&target, &init, &mut rng)?;
        }
        Ok(g)
    });

    let mut gamma = DMatrix::zeros(designs.n_subjects(), q);
    for (si, d) in draws.into_iter().enumerate() {
        let d = d?;
        for c in 0..q {
            gamma[(si, c)] = d[c];
        }
    }
    Ok(gamma)
}

/// Log full conditional of α: Gaussian prior + linear event term − sum of
/// per-piece hazard integrals, each convex in α.
struct AlphaTarget {
    prior_mean: f64,
    prior_var: f64,
    event_lin: f64,
    /// (λ_k·e^{η_s}, γ₀, γ₁, a, b) per subject-interval overlap
    pieces: Vec<(f64, f64, f64, f64, f64)>,
}

impl LogConcave for AlphaTarget {
    fn log_density(&self, alpha: f64) -> f64 {
        let d = alpha - self.prior_mean;
        let mut v = -0.5 * d * d / self.prior_var + self.event_lin * alpha;
        for &(w, g0, g1, a, b) in &self.pieces {
            v -= w * (alpha * g0).exp() * exp_linear_integral(alpha * g1, a, b);
        }
        v
    }

    fn log_density_deriv(&self, alpha: f64) -> Option<f64> {
        let mut v = -(alpha - self.prior_mean) / self.prior_var + self.event_lin;
        for &(w, g0, g1, a, b) in &self.pieces {
            let front = w * (alpha * g0).exp();
            v -= front
                * (g0 * exp_linear_integral(alpha * g1, a, b)
                    + g1 * exp_linear_moment(alpha * g1, a, b));
        }
        Some(v)
    }
}

/// ARS draw of the association parameter given everything else.
pub fn update_alpha(
    designs: &DesignBundle,
    gamma: &DMatrix<f64>,
    surv: &SurvState,
    prior_mean: f64,
    prior_var: f64,
    rng: &mut impl RngCore,
) -> Result<f64> {
    let q = designs.q();
    let mut event_lin = 0.0;
    let mut pieces = Vec::new();
    for (si, subj) in designs.subjects.iter().enumerate() {
        let row: Vec<f64> = (0..q).map(|c| gamma[(si, c)]).collect();
        let (g0, g1) = designs.eta_ls_line(&row);
        if subj.event {
            event_lin += g0 + g1 * subj.exit;
        }
        let front = surv.eta_s(subj).exp();
        for (lam, a, b) in overlap_pieces(subj, &surv.grid) {
            pieces.push((lam * front, g0, g1, a, b));
        }
    }
    let target = AlphaTarget {
        prior_mean,
        prior_var,
        event_lin,
        pieces,
    };
    let step = prior_var.sqrt().clamp(1e-3, 1.0);
    let init = bracket_mode(&target, surv.alpha, step)?;
    ars_sample(&target, &init, rng)
}

/// Independent per-τ chain seed derived from the master seed.
pub fn tau_seed(master: u64, index: usize) -> u64 {
    RngStream::from_seed(master).substream(index as u64 + 1).seed()
}

pub fn run_chain(
    data: &JointDataset,
    spec: &ModelSpec,
    mode: FitMode,
    seed: u64,
) -> Result<PosteriorSample> {
    run_chain_with(data, spec, mode, seed, None)
}

/// Run one Gibbs chain. Block order per iteration: β_l → shared effects →
/// weights (quantile) → σ² → Σ_γ → λ → β_s → α (joint). `progress` is
/// called with (iteration, chain_length) every 100 iterations.
pub fn run_chain_with(
    data: &JointDataset,
    spec: &ModelSpec,
    mode: FitMode,
    seed: u64,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<PosteriorSample> {
    spec.validate(mode.is_joint())?;
    let level = mode.level();
    let designs = build_designs(data, spec)?;
    let n_rec = designs.n_records();
    let q = designs.q();

    let (beta_mean, beta_cov) = spec.priors.beta_prior(designs.p_l());
    let (bs_mean, bs_cov) = spec.priors.beta_prior(designs.p_s());
    let re_scale = spec.priors.re_scale_matrix(q);

    let grid = if mode.is_joint() {
        default_grid(data, spec.grid_k)?
    } else {
        // survival block unused; a trivial covering grid keeps the state valid
        let t0 = data.survival.iter().map(|s| s.entry).fold(f64::INFINITY, f64::min);
        let t1 = data
            .survival
            .iter()
            .map(|s| s.exit)
            .fold(f64::NEG_INFINITY, f64::max);
        HazardGrid::new(vec![t0, t1.max(t0 + 1.0)], vec![1.0])?
    };

    let mut long = LongState::initial(&designs);
    let mut surv = SurvState::initial(grid, designs.p_s());

    let mut sample = PosteriorSample::empty(mode.tau(), seed, spec.spec_hash());
    let root = RngStream::from_seed(seed);
    let mcmc = &spec.mcmc;

    for t in 0..mcmc.chain_length {
        let block = |b: u64| root.substream2(t as u64, b);
        let wrap = |e: Error, name: &'static str| e.at_block(t, name);

        // fixed effects
        let eta_ls = eta_ls_vector(&designs, &long.gamma);
        let mut offset = DVector::zeros(n_rec);
        for i in 0..n_rec {
            offset[i] = designs.y[i] - eta_ls[i] - level.xi * long.weights[i];
        }
        long.beta_l = update_beta_l(
            &designs,
            &offset,
            &long.weights,
            long.sigma2,
            level,
            &beta_mean,
            &beta_cov,
            &mut block(BLOCK_BETA_L),
        )
        .map_err(|e| wrap(e, "beta_l"))?;

        // shared random effects
        if mode.is_joint() {
            long.gamma = update_shared_effects(&designs, &long, level, &surv, &block(BLOCK_GAMMA))
                .map_err(|e| wrap(e, "shared_effects"))?;
        } else {
            let eta_l = eta_l_vector(&designs, &long.beta_l);
            let mut off = DVector::zeros(n_rec);
            for i in 0..n_rec {
                off[i] = designs.y[i] - eta_l[i] - level.xi * long.weights[i];
            }
            long.gamma = update_random_effects_longonly(
                &designs,
                &off,
                &long.weights,
                long.sigma2,
                level,
                &long.re_cov,
                &block(BLOCK_GAMMA),
            )
            .map_err(|e| wrap(e, "shared_effects"))?;
        }

        // location residuals for the weight and variance updates
        let eta_l = eta_l_vector(&designs, &long.beta_l);
        let eta_ls = eta_ls_vector(&designs, &long.gamma);
        let residuals = &designs.y - eta_l - eta_ls;

        if mode.is_quantile() {
            long.weights = update_weights(&residuals, long.sigma2, level, &block(BLOCK_WEIGHTS))
                .map_err(|e| wrap(e, "weights"))?;
        }

        long.sigma2 = update_sigma2(
            &residuals,
            &long.weights,
            level,
            mode.is_quantile(),
            spec.priors.sigma2_a,
            spec.priors.sigma2_b,
            &mut block(BLOCK_SIGMA2),
        )
        .map_err(|e| wrap(e, "sigma2"))?;

        long.re_cov = update_re_cov(
            &long.gamma,
            spec.priors.re_df,
            &re_scale,
            &mut block(BLOCK_RE_COV),
        )
        .map_err(|e| wrap(e, "re_cov"))?;

        if mode.is_joint() {
            let lines: Vec<(f64, f64)> = (0..designs.n_subjects())
                .map(|si| {
                    let row: Vec<f64> = (0..q).map(|c| long.gamma[(si, c)]).collect();
                    designs.eta_ls_line(&row)
                })
                .collect();
            let etas: Vec<f64> = designs.subjects.iter().map(|s| surv.eta_s(s)).collect();

            surv.grid.values = update_lambda(
                &designs,
                &surv.grid,
                surv.alpha,
                &lines,
                &etas,
                spec.priors.lambda_a,
                spec.priors.lambda_b,
                &mut block(BLOCK_LAMBDA),
            )
            .map_err(|e| wrap(e, "lambda"))?;

            if designs.p_s() > 0 {
                surv.beta_s = update_beta_s(
                    &designs,
                    &surv.grid,
                    surv.alpha,
                    &lines,
                    &surv.beta_s,
                    &bs_mean,
                    &bs_cov,
                    &mut block(BLOCK_BETA_S),
                )
                .map_err(|e| wrap(e, "beta_s"))?;
            }

            surv.alpha = update_alpha(
                &designs,
                &long.gamma,
                &surv,
                spec.priors.alpha_mean,
                spec.priors.alpha_var,
                &mut block(BLOCK_ALPHA),
            )
            .map_err(|e| wrap(e, "alpha"))?;
        }

        let thin = mcmc.thin.max(1);
        if t >= mcmc.burn_in && (t - mcmc.burn_in) % thin == thin - 1 {
            store_draw(&mut sample, &designs, &long, &surv, mode, spec);
        }
        if let Some(cb) = progress {
            if (t + 1) % 100 == 0 || t + 1 == mcmc.chain_length {
                cb(t + 1, mcmc.chain_length);
            }
        }
    }
    Ok(sample)
}

fn push(draws: &mut BTreeMap<String, Vec<f64>>, name: String, v: f64) {
    draws.entry(name).or_default().push(v);
}

fn store_draw(
    sample: &mut PosteriorSample,
    designs: &DesignBundle,
    long: &LongState,
    surv: &SurvState,
    mode: FitMode,
    spec: &ModelSpec,
) {
    let draws = &mut sample.draws;
    for (j, name) in designs.l_names.iter().enumerate() {
        push(draws, format!("beta_l.{name}"), long.beta_l[j]);
    }
    push(draws, "sigma2".into(), long.sigma2);
    let q = designs.q();
    for a in 0..q {
        for b in a..q {
            push(draws, format!("re_cov.{a}.{b}"), long.re_cov[(a, b)]);
        }
    }
    if mode.is_joint() {
        for (k, v) in surv.grid.values.iter().enumerate() {
            push(draws, format!("lambda.{}", k + 1), *v);
        }
        for (j, name) in designs.s_names.iter().enumerate() {
            push(draws, format!("beta_s.{name}"), surv.beta_s[j]);
        }
        push(draws, "alpha".into(), surv.alpha);
    }
    if spec.store_random_effects {
        for (si, subj) in designs.subjects.iter().enumerate() {
            for c in 0..q {
                push(draws, format!("gamma.{}.{c}", subj.id), long.gamma[(si, c)]);
            }
        }
    }
}

/// One independent chain per τ level, seeds derived from the master seed by
/// τ index. `joint` selects quantile-joint over longitudinal-only mode.
pub fn run_quantile_battery(
    data: &JointDataset,
    spec: &ModelSpec,
    joint: bool,
) -> Result<Vec<PosteriorSample>> {
    if spec.tau_levels.is_empty() {
        return Err(Error::Config(
            "quantile battery needs at least one tau level".into(),
        ));
    }
    let results: Vec<Result<PosteriorSample>> = map_indexed(spec.tau_levels.len(), |i| {
        let level = QuantileLevel::new(spec.tau_levels[i])?;
        let mode = if joint {
            FitMode::QuantileJoint(level)
        } else {
            FitMode::LongQuantile(level)
        };
        run_chain(data, spec, mode, tau_seed(spec.mcmc.seed, i))
    });
    results.into_iter().collect()
}
