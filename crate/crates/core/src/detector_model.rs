//! Imperfect Geiger-mode detector: dark counts at mean rate `alpha` per
//! measurement interval and detection efficiency `eta`.
//!
//! [`count_dist`] is the exact count law. The inference modules use the
//! linearized click table of [`click_probs`], where the no-click probability
//! without input is `1 - alpha` instead of `exp(-alpha)`.

use crate::distributions::{gamma_bulk_threshold, log_poisson_pmf};
use crate::specfun::ln_gamma_unchecked;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    alpha: f64,
    eta: f64,
    beta: f64,
    gamma: f64,
}

impl DetectorParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::domain(format!("dark rate alpha must lie in [0, 1), got {alpha}")));
        }
        if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
            return Err(Error::domain(format!("efficiency eta must lie in [0, 1], got {eta}")));
        }
        Ok(Self {
            alpha,
            eta,
            beta: (1.0 - alpha) * (1.0 - eta),
            gamma: (1.0 - alpha) * eta,
        })
    }

    /// Builds the detector from its dark rate and no-click probability
    /// `beta = (1 - alpha)(1 - eta)`.
    pub fn from_alpha_beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::domain(format!("dark rate alpha must lie in [0, 1), got {alpha}")));
        }
        if !(beta.is_finite() && beta >= 0.0 && beta <= 1.0 - alpha) {
            return Err(Error::domain(format!(
                "beta must lie in [0, 1 - alpha], got {beta}"
            )));
        }
        let mut d = Self::new(alpha, (1.0 - beta / (1.0 - alpha)).clamp(0.0, 1.0))?;
        d.beta = beta;
        d.gamma = 1.0 - alpha - beta;
        Ok(d)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn perfect() -> Self {
        Self::new(0.0, 1.0).expect("valid")
    }
}

/// Conditional click table `pr(click | photon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbs {
    pub click_given_vacuum: f64,
    pub none_given_vacuum: f64,
    pub none_given_photon: f64,
    pub click_given_photon: f64,
}

pub fn click_probs(params: &DetectorParams) -> ClickProbs {
    ClickProbs {
        click_given_vacuum: params.alpha,
        none_given_vacuum: 1.0 - params.alpha,
        none_given_photon: params.beta,
        click_given_photon: 1.0 - params.beta,
    }
}

fn xlogy(k: f64, y: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * y.ln()
    }
}

/// `Pr(M = m | N = n)`: binomial thinning of `n` photons plus Poisson dark counts.
pub fn count_dist(m: u64, n: u64, params: &DetectorParams) -> f64 {
    let (a, eta) = (params.alpha, params.eta);
    let r_min = m.saturating_sub(n);
    let nf = n as f64;
    let mut total = 0.0;
    for r in r_min..=m {
        let (rf, kf) = (r as f64, (m - r) as f64);
        let lt = -a + xlogy(rf, a) - ln_gamma_unchecked(rf + 1.0)
            + ln_gamma_unchecked(nf + 1.0)
            - ln_gamma_unchecked(kf + 1.0)
            - ln_gamma_unchecked(nf - kf + 1.0)
            + xlogy(kf, eta)
            + xlogy(nf - kf, 1.0 - eta);
        total += lt.exp();
    }
    total
}

/// Largest deviation between the count law mixed over `N ~ Poisson(nu)` and
/// `Poisson(alpha + eta * nu)`, over `m = 0..=m_max`.
pub fn poisson_closure_check(nu: f64, params: &DetectorParams, m_max: u64) -> Result<f64> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::domain(format!("photon mean nu must be positive, got {nu}")));
    }
    let n_max = (gamma_bulk_threshold(nu) + 10.0 * nu.sqrt() + 30.0).ceil() as u64;
    let lambda = params.alpha + params.eta * nu;
    let mut worst: f64 = 0.0;
    for m in 0..=m_max {
        let mut mixed = 0.0;
        for n in 0..=n_max {
            mixed += count_dist(m, n, params) * log_poisson_pmf(n, nu)?.exp();
        }
        let direct = log_poisson_pmf(m, lambda)?.exp();
        worst = worst.max((mixed - direct).abs());
    }
    Ok(worst)
}
