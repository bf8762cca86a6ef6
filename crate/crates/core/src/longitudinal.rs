//! Gibbs updates for the longitudinal (quantile or mean) mixed submodel:
//! fixed effects, mixture weights, model variance and the random-effects
//! covariance. Mean mode is the quantile machinery at w ≡ 1, ξ = 0, φ = 1.

use crate::ald::QuantileLevel;
use crate::dist::{
    draw_inverse_gamma, draw_inverse_gaussian, draw_mvn_from_precision, draw_inverse_wishart,
    spd_inverse,
};
use crate::exec::map_indexed;
use crate::model::DesignBundle;
use crate::rng::RngStream;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

/// Residuals smaller than this are clamped in the weight update; the
/// inverse-Gaussian mean diverges at r = 0.
const RESIDUAL_CLAMP: f64 = 1e-10;

/// Current values of the longitudinal block.
#[derive(Debug, Clone)]
pub struct LongState {
    pub beta_l: DVector<f64>,
    /// n × q random effects (row per subject).
    pub gamma: DMatrix<f64>,
    pub sigma2: f64,
    /// One mixture weight per longitudinal record; all 1 in mean mode.
    pub weights: Vec<f64>,
    /// q × q random-effects covariance.
    pub re_cov: DMatrix<f64>,
}

impl LongState {
    pub fn initial(designs: &DesignBundle) -> LongState {
        let q = designs.q();
        LongState {
            beta_l: DVector::zeros(designs.p_l()),
            gamma: DMatrix::zeros(designs.n_subjects(), q),
            sigma2: 1.0,
            weights: vec![1.0; designs.n_records()],
            re_cov: DMatrix::identity(q, q),
        }
    }
}

/// Stacked fixed-part predictor Xβ.
pub fn eta_l_vector(designs: &DesignBundle, beta: &DVector<f64>) -> DVector<f64> {
    &designs.x_l * beta
}

/// Stacked shared predictor z_ij·γ_i.
pub fn eta_ls_vector(designs: &DesignBundle, gamma: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(designs.n_records());
    for (si, subj) in designs.subjects.iter().enumerate() {
        let g = gamma.row(si);
        for (local, rec) in subj.rows.clone().enumerate() {
            let mut v = 0.0;
            for c in 0..subj.z.ncols() {
                v += subj.z[(local, c)] * g[c];
            }
            out[rec] = v;
        }
    }
    out
}

/// Posterior precision matrix and linear term of the fixed-effects Gaussian
/// full conditional: Σ*⁻¹ = Xᵀ diag(1/(σ²φw)) X + Σ_β⁻¹ and
/// b = Xᵀ diag(1/(σ²φw)) (y − η_ls − ξw) + Σ_β⁻¹ μ_β.
fn beta_fc_precision_linear(
    designs: &DesignBundle,
    offset_residual: &DVector<f64>,
    weights: &[f64],
    sigma2: f64,
    level: QuantileLevel,
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = designs.p_l();
    let x = &designs.x_l;
    let mut precision = spd_inverse(prior_cov)?;
    let mut linear = &precision * prior_mean;
    let denom_base = sigma2 * level.phi;
    for i in 0..designs.n_records() {
        let d = 1.0 / (denom_base * weights[i]);
        for a in 0..p {
            let xa = x[(i, a)];
            linear[a] += xa * d * offset_residual[i];
            for b in a..p {
                let v = xa * x[(i, b)] * d;
                precision[(a, b)] += v;
                if a != b {
                    precision[(b, a)] += v;
                }
            }
        }
    }
    Ok((precision, linear))
}

/// Posterior (mean, precision) of the fixed-effects Gaussian full
/// conditional. `offset_residual` is y − η_ls − ξw.
pub fn beta_fc_params(
    designs: &DesignBundle,
    offset_residual: &DVector<f64>,
    weights: &[f64],
    sigma2: f64,
    level: QuantileLevel,
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (precision, linear) = beta_fc_precision_linear(
        designs,
        offset_residual,
        weights,
        sigma2,
        level,
        prior_mean,
        prior_cov,
    )?;
    let l = crate::dist::cholesky_lower(&precision)?;
    let mean = crate::dist::solve_lower_transpose(&l, &crate::dist::solve_lower(&l, &linear));
    Ok((mean, precision))
}

/// Draw new fixed effects from their Gaussian full conditional.
pub fn update_beta_l(
    designs: &DesignBundle,
    offset_residual: &DVector<f64>,
    weights: &[f64],
    sigma2: f64,
    level: QuantileLevel,
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    rng: &mut impl RngCore,
) -> Result<DVector<f64>> {
    let (precision, linear) = beta_fc_precision_linear(
        designs,
        offset_residual,
        weights,
        sigma2,
        level,
        prior_mean,
        prior_cov,
    )?;
    draw_mvn_from_precision(&precision, &linear, rng)
}

/// Per-subject conjugate random-effects update for longitudinal-only mode.
/// `offset_residual` is y − η_l − ξw. Deterministic per (block_rng, subject).
pub fn update_random_effects_longonly(
    designs: &DesignBundle,
    offset_residual: &DVector<f64>,
    weights: &[f64],
    sigma2: f64,
    level: QuantileLevel,
    re_cov: &DMatrix<f64>,
    block_rng: &RngStream,
) -> Result<DMatrix<f64>> {
    let q = designs.q();
    let prior_precision = spd_inverse(re_cov)?;
    let denom_base = sigma2 * level.phi;
    let draws: Vec<Result<DVector<f64>>> = map_indexed(designs.n_subjects(), |si| {
        let subj = &designs.subjects[si];
        let mut precision = prior_precision.clone();
        let mut linear = DVector::zeros(q);
        for (local, rec) in subj.rows.clone().enumerate() {
            let d = 1.0 / (denom_base * weights[rec]);
            for a in 0..q {
                let za = subj.z[(local, a)];
                linear[a] += za * d * offset_residual[rec];
                for b in a..q {
                    let v = za * subj.z[(local, b)] * d;
                    precision[(a, b)] += v;
                    if a != b {
                        precision[(b, a)] += v;
                    }
                }
            }
        }
        let mut rng = block_rng.substream(si as u64);
        draw_mvn_from_precision(&precision, &linear, &mut rng)
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

/// (μ, λ) of the inverse-Gaussian full conditional of the reciprocal weight.
pub fn weight_fc_params(level: QuantileLevel, sigma2: f64, residual: f64) -> (f64, f64) {
    let r = if residual.abs() < RESIDUAL_CLAMP {
        RESIDUAL_CLAMP
    } else {
        residual.abs()
    };
    let a = level.xi * level.xi + 2.0 * level.phi;
    let mu = a.sqrt() / r;
    let lambda = a / (sigma2 * level.phi);
    (mu, lambda)
}

/// Quantile-mode weight update: per record, draw v = w⁻¹ ~ InvGauss and set
/// w = 1/v. `residuals` are y − η_l − η_ls (no ξw offset).
pub fn update_weights(
    residuals: &DVector<f64>,
    sigma2: f64,
    level: QuantileLevel,
    block_rng: &RngStream,
) -> Result<Vec<f64>> {
    let draws: Vec<Result<f64>> = map_indexed(residuals.len(), |i| {
        let (mu, lambda) = weight_fc_params(level, sigma2, residuals[i]);
        let mut rng = block_rng.substream(i as u64);
        let v = draw_inverse_gaussian(mu, lambda, &mut rng)?;
        Ok(1.0 / v)
    });
    draws.into_iter().collect()
}

/// (shape, rate) of the σ² inverse-gamma full conditional.
///
/// Quantile mode: IG(a₀ + 3N/2, b₀ + (1/2φ)Σ wᵢ⁻¹(rᵢ − ξwᵢ)² + Σ wᵢ).
/// Mean mode (w ≡ 1, ξ = 0, φ = 1) reduces to IG(a₀ + N/2, b₀ + ½Σ rᵢ²)
/// when `quantile_mode` is false.
pub fn sigma2_fc_params(
    residuals: &DVector<f64>,
    weights: &[f64],
    level: QuantileLevel,
    quantile_mode: bool,
    a0: f64,
    b0: f64,
) -> (f64, f64) {
    let n = residuals.len() as f64;
    if quantile_mode {
        let mut quad = 0.0;
        let mut wsum = 0.0;
        for (i, &r) in residuals.iter().enumerate() {
            let w = weights[i];
            let e = r - level.xi * w;
            quad += e * e / w;
            wsum += w;
        }
        (a0 + 1.5 * n, b0 + quad / (2.0 * level.phi) + wsum)
    } else {
        let quad: f64 = residuals.iter().map(|r| r * r).sum();
        (a0 + 0.5 * n, b0 + 0.5 * quad)
    }
}

/// Draw a new σ² from its inverse-gamma full conditional. `residuals` are
/// y − η (location only).
pub fn update_sigma2(
    residuals: &DVector<f64>,
    weights: &[f64],
    level: QuantileLevel,
    quantile_mode: bool,
    a0: f64,
    b0: f64,
    rng: &mut impl RngCore,
) -> Result<f64> {
    let (shape, rate) = sigma2_fc_params(residuals, weights, level, quantile_mode, a0, b0);
    draw_inverse_gamma(shape, rate, rng)
}

/// Inverse-Wishart conjugate update of the random-effects covariance:
/// IW(ν + n, S + Σᵢ γᵢγᵢᵀ).
pub fn update_re_cov(
    gamma: &DMatrix<f64>,
    prior_df: f64,
    prior_scale: &DMatrix<f64>,
    rng: &mut impl RngCore,
) -> Result<DMatrix<f64>> {
    let n = gamma.nrows();
    let q = gamma.ncols();
    let mut scale = prior_scale.clone();
    for i in 0..n {
        for a in 0..q {
            for b in 0..q {
                scale[(a, b)] += gamma[(i, a)] * gamma[(i, b)];
            }
        }
    }
    draw_inverse_wishart(prior_df + n as f64, &scale, rng)
}
