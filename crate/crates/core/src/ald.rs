//! Asymmetric Laplace distribution: check (pinball) loss, log-density, CDF,
//! and the location-scale mixture that turns the quantile likelihood into a
//! conditionally Gaussian one.
//!
//! Throughout, `scale` is the σ² parameter of the mixture construction: the
//! mixing weight is Exponential with rate 1/σ² and the conditional law of the
//! response is N(location + ξw, σ²φw).

use crate::dist::{draw_exponential, draw_std_normal};
use crate::{Error, Result};
use rand::RngCore;

/// A quantile level τ with its mixture constants ξ = (1−2τ)/(τ(1−τ)) and
/// φ = 2/(τ(1−τ)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileLevel {
    pub tau: f64,
    pub xi: f64,
    pub phi: f64,
}

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<QuantileLevel> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(
                "QuantileLevel",
                format!("tau = {tau}, must lie in (0, 1)"),
            ));
        }
        let denom = tau * (1.0 - tau);
        Ok(QuantileLevel {
            tau,
            xi: (1.0 - 2.0 * tau) / denom,
            phi: 2.0 / denom,
        })
    }

    /// Degenerate level used for mean-regression mode: w ≡ 1, ξ = 0, φ = 1
    /// reduce every quantile-mode formula to its Gaussian counterpart.
    pub fn mean_mode() -> QuantileLevel {
        QuantileLevel {
            tau: 0.5,
            xi: 0.0,
            phi: 1.0,
        }
    }
}

/// Pinball loss ρ_τ(u): u·τ for u ≥ 0, u·(τ−1) for u < 0.
pub fn check_loss(u: f64, level: QuantileLevel) -> f64 {
    if u >= 0.0 {
        u * level.tau
    } else {
        u * (level.tau - 1.0)
    }
}

/// Log-density of ALD(location, scale, τ).
pub fn ald_logpdf(y: f64, location: f64, scale: f64, level: QuantileLevel) -> f64 {
    debug_assert!(scale > 0.0);
    (level.tau * (1.0 - level.tau) / scale).ln() - check_loss(y - location, level) / scale
}

/// Closed-form ALD CDF; F(location) = τ by construction.
pub fn ald_cdf(y: f64, location: f64, scale: f64, level: QuantileLevel) -> f64 {
    let tau = level.tau;
    let u = y - location;
    if u < 0.0 {
        tau * ((1.0 - tau) * u / scale).exp()
    } else {
        1.0 - (1.0 - tau) * (-tau * u / scale).exp()
    }
}

/// Inverse of [`ald_cdf`] in y.
pub fn ald_quantile(p: f64, location: f64, scale: f64, level: QuantileLevel) -> f64 {
    let tau = level.tau;
    debug_assert!(p > 0.0 && p < 1.0);
    if p < tau {
        location + scale / (1.0 - tau) * (p / tau).ln()
    } else {
        location - scale / tau * ((1.0 - p) / (1.0 - tau)).ln()
    }
}

/// One draw from the location-scale mixture: w ~ Exp(rate 1/σ²), then
/// y | w ~ N(location + ξw, σ²φw). Marginally y ~ ALD(location, σ², τ).
/// Returns (y, w).
pub fn mixture_draw(
    location: f64,
    scale: f64,
    level: QuantileLevel,
    rng: &mut impl RngCore,
) -> Result<(f64, f64)> {
    if !(scale > 0.0) {
        return Err(Error::invalid("mixture_draw", format!("scale = {scale}")));
    }
    let w = draw_exponential(1.0 / scale, rng)?;
    let z = draw_std_normal(rng);
    let y = location + level.xi * w + z * (scale * level.phi * w).sqrt();
    Ok((y, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn quantile_level_constants() {
        let q = QuantileLevel::new(0.5).unwrap();
        assert_relative_eq!(q.xi, 0.0);
        assert_relative_eq!(q.phi, 8.0);
        let q = QuantileLevel::new(0.25).unwrap();
        assert_relative_eq!(q.xi, (1.0 - 0.5) / (0.25 * 0.75));
        assert_relative_eq!(q.phi, 2.0 / (0.25 * 0.75));
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
    }

    #[test]
    fn check_loss_values() {
        let q = QuantileLevel::new(0.9).unwrap();
        assert_relative_eq!(check_loss(1.0, q), 0.9);
        assert_relative_eq!(check_loss(-1.0, q), 0.1, epsilon = 1e-12);
        assert_relative_eq!(check_loss(0.0, q), 0.0);
    }

    #[test]
    fn check_loss_convexity() {
        let mut rng = RngStream::from_seed(31);
        let q = QuantileLevel::new(0.37).unwrap();
        for _ in 0..10_000 {
            let u1: f64 = rng.gen::<f64>() * 20.0 - 10.0;
            let u2: f64 = rng.gen::<f64>() * 20.0 - 10.0;
            let lam: f64 = rng.gen();
            let lhs = check_loss(lam * u1 + (1.0 - lam) * u2, q);
            let rhs = lam * check_loss(u1, q) + (1.0 - lam) * check_loss(u2, q);
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn logpdf_at_location() {
        let q = QuantileLevel::new(0.3).unwrap();
        assert_relative_eq!(ald_logpdf(2.0, 2.0, 1.0, q), (0.21f64).ln());
    }

    #[test]
    fn density_integrates_to_one() {
        // trapezoid quadrature over a wide range
        let q = QuantileLevel::new(0.2).unwrap();
        let (a, b, n) = (-120.0, 120.0, 4_000_000usize);
        let h = (b - a) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let y = a + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * ald_logpdf(y, 0.0, 1.0, q).exp();
        }
        total *= h;
        assert!((total - 1.0).abs() < 1e-6, "integral = {total}");
    }

    #[test]
    fn cdf_at_location_equals_tau() {
        for k in 1..=19 {
            let tau = k as f64 * 0.05;
            let q = QuantileLevel::new(tau).unwrap();
            assert_relative_eq!(ald_cdf(0.0, 0.0, 1.3, q), tau, epsilon = 1e-12);
        }
    }

    #[test]
    fn cdf_at_location_by_quadrature() {
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let q = QuantileLevel::new(tau).unwrap();
            let (a, n) = (-200.0, 2_000_000usize);
            let h = (0.0 - a) / n as f64;
            let mut total = 0.0;
            for i in 0..=n {
                let y = a + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * ald_logpdf(y, 0.0, 1.0, q).exp();
            }
            total *= h;
            assert!((total - tau).abs() < 1e-6, "tau {tau}: {total}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let q = QuantileLevel::new(0.65).unwrap();
        for p in [0.01, 0.2, 0.65, 0.9, 0.999] {
            let y = ald_quantile(p, 1.5, 0.7, q);
            assert_relative_eq!(ald_cdf(y, 1.5, 0.7, q), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn mixture_quantile_and_weight_mean() {
        let q = QuantileLevel::new(0.25).unwrap();
        let mut rng = RngStream::from_seed(32);
        let n = 1_000_000;
        let mut ys = Vec::with_capacity(n);
        let mut wsum = 0.0;
        for _ in 0..n {
            let (y, w) = mixture_draw(0.0, 1.0, q, &mut rng).unwrap();
            ys.push(y);
            wsum += w;
        }
        ys.sort_by(|a, b| a.total_cmp(b));
        let q25 = ys[(0.25 * n as f64) as usize];
        assert!(q25.abs() < 0.01, "25th percentile {q25}");
        let wmean = wsum / n as f64;
        assert!((wmean - 1.0).abs() < 0.005, "weight mean {wmean}");
    }

    #[test]
    fn mixture_marginal_matches_inverse_cdf_draws() {
        let q = QuantileLevel::new(0.4).unwrap();
        let mut rng = RngStream::from_seed(33);
        let n = 100_000;
        let mut a: Vec<f64> = (0..n)
            .map(|_| mixture_draw(0.0, 1.0, q, &mut rng).unwrap().0)
            .collect();
        a.sort_by(|x, y| x.total_cmp(y));
        // one-sample KS against the closed-form ALD CDF
        let ks = a
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = ald_cdf(x, 0.0, 1.0, q);
                (c - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - c).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }
}
