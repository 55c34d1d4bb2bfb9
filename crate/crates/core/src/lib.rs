//! Bayesian inference of POVM outcome probabilities from photon counts
//! recorded by imperfect detectors (dark counts, efficiency below one).
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: log-gamma, regularized incomplete gamma and beta functions
//!   (real and complex-argument incomplete gamma), all with log-space variants.
//! * [`distributions`]: Poisson, gamma, binomial and Dirichlet helpers.
//! * [`quadrature`]: adaptive Gauss–Kronrod integration with support
//!   localization for sharply peaked integrands.
//! * [`detector_model`]: conditional count statistics of a Geiger-mode detector.
//! * [`pulsed_inference`]: posterior moments for single-photon pulsed setups.
//! * [`truncated_dirichlet`]: normalization integrals of the truncated
//!   Dirichlet distribution (saddle-point and product-of-betas methods).
//! * [`nuisance`]: Edgeworth quadrature rules for imprecisely known parameters.
//! * [`cw_inference`]: continuous-wave (Poissonian) experiments.

pub mod cw_inference;
pub mod detector_model;
pub mod distributions;
mod error;
pub mod moments;
pub mod nuisance;
pub mod pulsed_inference;
pub mod quadrature;
pub mod specfun;
pub mod truncated_dirichlet;

pub use error::{Error, Result};
pub use moments::PosteriorMoments;
