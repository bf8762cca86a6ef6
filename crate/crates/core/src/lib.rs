//! Bayesian joint modelling of longitudinal measurements and right-censored
//! event times, where the longitudinal submodel is a quantile regression via
//! the asymmetric-Laplace location-scale mixture and the survival submodel is
//! a proportional-hazards model with a piecewise-constant baseline hazard.
//! The two parts are linked through shared random effects (random intercept
//! and slope) scaled by an association parameter inside the log-hazard.
//!
//! The crate exposes three fit modes:
//! * `long-quantile` — quantile mixed model for the longitudinal data alone,
//! * `mean-joint` — Gaussian joint model,
//! * `quantile-joint` — the joint quantile model, one chain per quantile
//!   level.
//!
//! All samplers are seeded and deterministic: the same seed produces the same
//! posterior draws, with or without the `parallel` feature.

pub mod ald;
pub mod config;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod exec;
pub mod joint;
pub mod longitudinal;
pub mod model;
pub mod output;
pub mod rng;
pub mod simulate;
pub mod survival;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
