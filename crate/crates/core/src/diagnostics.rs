//! Posterior summaries, the one-sided-sign significance rule, effective
//! sample size, Geweke convergence z-scores, figure-data emission, and
//! grid-based numeric CDF utilities used as sampling oracles.

use crate::joint::PosteriorSample;
use std::collections::BTreeMap;

/// Summary of one scalar parameter's stored draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub mean: f64,
    pub sd: f64,
    /// Quantiles at 2.5, 25, 50, 75 and 97.5 percent.
    pub quantiles: [f64; 5],
    /// max(fraction > 0, fraction < 0); in [0.5, 1].
    pub sign_fraction: f64,
    /// sign_fraction ≥ 0.95
    pub significant: bool,
    pub ess: f64,
    pub geweke_z: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub parameters: BTreeMap<String, ParameterSummary>,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Effective sample size via the initial-positive-sequence truncation of the
/// autocorrelation sum. A constant chain reports ESS = 1.
pub fn effective_sample_size(draws: &[f64]) -> f64 {
    let n = draws.len();
    if n < 2 {
        return n as f64;
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let c0: f64 = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let autocov = |lag: usize| -> f64 {
        draws[..n - lag]
            .iter()
            .zip(&draws[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64
    };
    // sum paired autocorrelations while the pair sums stay positive
    let mut sum = 0.0;
    let mut lag = 1usize;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let ess = n as f64 / (1.0 + 2.0 * sum);
    ess.clamp(1.0, n as f64)
}

/// Geweke z-score comparing the first 10% of the chain against the last 50%,
/// with spectral variances approximated by var/ESS per window.
pub fn geweke_z(draws: &[f64]) -> f64 {
    let n = draws.len();
    if n < 20 {
        return 0.0;
    }
    let a = &draws[..n / 10];
    let b = &draws[n / 2..];
    let stats = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        (m, v / effective_sample_size(xs))
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    let denom = (va + vb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (ma - mb) / denom
    }
}

pub fn summarize_draws(draws: &[f64]) -> ParameterSummary {
    let n = draws.len().max(1) as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantiles = [0.025, 0.25, 0.5, 0.75, 0.975].map(|p| quantile_sorted(&sorted, p));
    let pos = draws.iter().filter(|&&x| x > 0.0).count() as f64 / n;
    let neg = draws.iter().filter(|&&x| x < 0.0).count() as f64 / n;
    let sign_fraction = pos.max(neg).max(0.5);
    ParameterSummary {
        mean,
        sd,
        quantiles,
        sign_fraction,
        significant: sign_fraction >= 0.95,
        ess: effective_sample_size(draws),
        geweke_z: geweke_z(draws),
    }
}

pub fn summarize(sample: &PosteriorSample) -> Summary {
    Summary {
        parameters: sample
            .draws
            .iter()
            .map(|(name, draws)| (name.clone(), summarize_draws(draws)))
            .collect(),
    }
}

/// Long-format row for external box plotting of a battery parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub tau: f64,
    pub draw: f64,
    pub significant: bool,
}

/// Flatten one parameter's draws across a battery of per-τ samples into a
/// (tau, draw, significance) table.
pub fn emit_figure_data(battery: &[PosteriorSample], parameter: &str) -> Vec<FigureRow> {
    let mut rows = Vec::new();
    for sample in battery {
        let Some(draws) = sample.draws.get(parameter) else {
            continue;
        };
        let tau = sample.tau.unwrap_or(f64::NAN);
        let significant = summarize_draws(draws).significant;
        rows.extend(draws.iter().map(|&draw| FigureRow {
            tau,
            draw,
            significant,
        }));
    }
    rows
}

/// One-sample Kolmogorov–Smirnov statistic of sorted samples against a CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic; both inputs must be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Numerically normalized CDF of an unnormalized log-density on a grid,
/// with trapezoid integration. Serves as an independent oracle for the
/// non-conjugate full conditionals.
pub struct GridCdf {
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn new(logpdf: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> GridCdf {
        assert!(lo < hi && n >= 2);
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let ls: Vec<f64> = xs.iter().map(|&x| logpdf(x)).collect();
        let lmax = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ps: Vec<f64> = ls.iter().map(|&l| (l - lmax).exp()).collect();
        let mut cum = vec![0.0; n + 1];
        for i in 1..=n {
            cum[i] = cum[i - 1] + 0.5 * (ps[i - 1] + ps[i]) * h;
        }
        let total = cum[n];
        assert!(total > 0.0, "grid density integrates to zero");
        for c in cum.iter_mut() {
            *c /= total;
        }
        GridCdf { xs, cum }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let i = self.xs.partition_point(|&v| v < x);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.cum[i - 1] * (1.0 - t) + self.cum[i] * t
    }

    /// Inverse CDF by interpolation; used for grid inverse-CDF sampling.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.cum.partition_point(|&c| c < p);
        if i == 0 {
            return self.xs[0];
        }
        if i >= self.cum.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cum[i - 1], self.cum[i]);
        let t = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.xs[i - 1] * (1.0 - t) + self.xs[i] * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn constant_chain() {
        let draws = vec![2.5; 500];
        let s = summarize_draws(&draws);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.ess, 1.0);
        assert_eq!(s.sign_fraction, 1.0);
        assert!(s.significant);
    }

    #[test]
    fn iid_chain_ess_near_n() {
        let mut rng = RngStream::from_seed(61);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| crate::dist::draw_std_normal(&mut rng))
            .collect();
        let s = summarize_draws(&draws);
        assert!(s.ess > 8_000.0 && s.ess < 12_000.0, "ess {}", s.ess);
        assert!((s.sign_fraction - 0.5).abs() < 0.02);
        assert!(s.geweke_z.abs() < 4.0);
    }

    #[test]
    fn ar1_chain_ess_matches_analytic() {
        // AR(1) with rho = 0.9: ESS/N = (1-rho)/(1+rho)
        let rho: f64 = 0.9;
        let mut rng = RngStream::from_seed(62);
        let n = 200_000;
        let mut draws = Vec::with_capacity(n);
        let mut x = 0.0;
        let innov_sd = (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            x = rho * x + innov_sd * crate::dist::draw_std_normal(&mut rng);
            draws.push(x);
        }
        let ess = effective_sample_size(&draws);
        let expect = n as f64 * (1.0 - rho) / (1.0 + rho);
        assert!(
            (ess / expect - 1.0).abs() < 0.25,
            "ess {ess}, expected around {expect}"
        );
    }

    #[test]
    fn mean_sd_quantiles_are_permutation_invariant() {
        let mut rng = RngStream::from_seed(63);
        let draws: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let mut shuffled = draws.clone();
        shuffled.reverse();
        let a = summarize_draws(&draws);
        let b = summarize_draws(&shuffled);
        // summation order may differ at machine precision
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert_eq!(a.quantiles, b.quantiles);
        assert_eq!(a.sign_fraction, b.sign_fraction);
    }

    #[test]
    fn grid_cdf_matches_normal() {
        let g = GridCdf::new(|x| -0.5 * x * x, -10.0, 10.0, 20_000);
        assert!((g.cdf(0.0) - 0.5).abs() < 1e-6);
        assert!((g.cdf(1.959964) - 0.975).abs() < 1e-4);
        assert!((g.quantile(0.5)).abs() < 1e-6);
        assert!((g.quantile(0.975) - 1.959964).abs() < 1e-3);
    }

    #[test]
    fn figure_rows_count() {
        use crate::joint::PosteriorSample;
        let mut battery = Vec::new();
        for k in 1..=9 {
            let tau = k as f64 / 10.0;
            let mut s = PosteriorSample::empty(Some(tau), 0, "spec".into());
            s.draws.insert("alpha".into(), vec![0.1; 1000]);
            battery.push(s);
        }
        let rows = emit_figure_data(&battery, "alpha");
        assert_eq!(rows.len(), 9000);
        let single = emit_figure_data(&battery[..1], "alpha");
        assert_eq!(single.len(), 1000);
        assert!(single.iter().all(|r| r.tau == 0.1));
    }
}
