//! Posterior moments for pulsed single-photon experiments.
//!
//! * One detector: click probability `q = alpha + gamma * p`, the posterior of
//!   `q` is a beta law truncated to `[alpha, 1 - beta]`.
//! * Two identical detectors behind a splitter: after discarding no-click and
//!   double-click events, the single-click fraction follows a binomial with
//!   success probability `a + (1 - 2a) p` where `a` is the effective dark rate.
//! * Two different detectors: moments of `p` from 1-D quadrature of the
//!   product of linear click probabilities.
//! * K outcomes with identical detectors: truncated Dirichlet, see
//!   [`crate::truncated_dirichlet`].

use rayon::prelude::*;

use crate::detector_model::DetectorParams;
use crate::distributions::{log_binomial_pmf, multinomial_pmf};
use crate::moments::PosteriorMoments;
use crate::nuisance::NodeIntegrals;
use crate::quadrature::{integrate_peaked_many, Support};
use crate::specfun::{ln_beta_unchecked, log_gen_reg_inc_beta};
use crate::truncated_dirichlet::{Method, RMoments, TruncatedDirichlet};
use crate::{Error, Result};

const QUAD_REL_TOL: f64 = 1e-11;

/// Outcome frequencies `g` and, when known, the number of runs `N`.
///
/// For multi-detector records only exclusive single-click events are
/// counted, so `sum(g) <= N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRecord {
    counts: Vec<u64>,
    runs: Option<u64>,
}

impl CountRecord {
    pub fn new(counts: Vec<u64>, runs: Option<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::domain("count record is empty"));
        }
        let total: u64 = counts.iter().sum();
        if let Some(n) = runs {
            if total > n {
                return Err(Error::domain(format!(
                    "counts sum to {total}, more than the {n} runs"
                )));
            }
        }
        Ok(Self { counts, runs })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn runs(&self) -> Option<u64> {
        self.runs
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Click probability `alpha + gamma * p` of a detector fed with probability `p`.
pub fn detection_prob(p: f64, params: &DetectorParams) -> Result<f64> {
    check_prob("p", p)?;
    Ok(params.alpha() + params.gamma() * p)
}

/// Raw moments of `q` under the density `∝ q^g (1-q)^(n-g)` on `[lo, hi]`,
/// plus the log of the unnormalized integral.
fn truncated_beta(g: f64, n: f64, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
    let (a, b) = (g + 1.0, n - g + 1.0);
    let l0 = log_gen_reg_inc_beta(lo, hi, a, b)?;
    let l1 = log_gen_reg_inc_beta(lo, hi, a + 1.0, b)?;
    let l2 = log_gen_reg_inc_beta(lo, hi, a + 2.0, b)?;
    if !l0.is_finite() {
        return Err(Error::numeric(
            format!("posterior mass underflows on [{lo}, {hi}] for g={g}, N={n}"),
            None,
        ));
    }
    let m1 = (l1 - l0).exp() * a / (n + 2.0);
    let m2 = (l2 - l0).exp() * a * (a + 1.0) / ((n + 2.0) * (n + 3.0));
    Ok((m1, m2, l0 + ln_beta_unchecked(a, b)))
}

/// Posterior of `p` after `g` clicks in `n` runs of one detector.
pub fn single_detector_posterior(g: u64, n: u64, params: &DetectorParams) -> Result<PosteriorMoments> {
    Ok(single_detector_node(g, n, params)?.into_moments())
}

/// Per-parameter-value integrals for [`crate::nuisance::marginalize_posterior`].
pub fn single_detector_node(g: u64, n: u64, params: &DetectorParams) -> Result<NodeIntegrals> {
    if g > n {
        return Err(Error::domain(format!("clicks g={g} exceed runs N={n}")));
    }
    let slope = params.gamma();
    if !(slope > 0.0) {
        return Err(Error::domain(
            "alpha + beta >= 1: the detector carries no information",
        ));
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    let (m1, m2, log_norm) = truncated_beta(g as f64, n as f64, alpha, 1.0 - beta)?;
    let mu = (m1 - alpha) / slope;
    let var = (m2 - m1 * m1) / (slope * slope);
    Ok(NodeIntegrals::scalar(log_norm - slope.ln(), mu, var + mu * mu))
}

/// `a = a1 / ((K-1) a1 + a2)` with `a1 = alpha*beta`, `a2 = (1-alpha)(1-beta)`.
pub fn effective_dark_rate(params1: &DetectorParams, params2: &DetectorParams, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain(format!("need at least two outcomes, got K={k}")));
    }
    if params1 != params2 {
        return Err(Error::Unsupported(
            "the effective dark rate is only defined for identical detectors".into(),
        ));
    }
    let (alpha, beta) = (params1.alpha(), params1.beta());
    let a1 = alpha * beta;
    let a2 = (1.0 - alpha) * (1.0 - beta);
    if !(a1 + a2 > 0.0) {
        return Err(Error::domain("alpha*beta + (1-alpha)(1-beta) vanishes"));
    }
    Ok(a1 / ((k as f64 - 1.0) * a1 + a2))
}

/// Joint click probabilities of two detectors when detector 1 receives the
/// photon with probability `p`. `q10` means detector 1 clicked alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoDetectorClicks {
    pub q00: f64,
    pub q01: f64,
    pub q10: f64,
    pub q11: f64,
}

pub fn two_detector_click_probs(p: f64, d1: &DetectorParams, d2: &DetectorParams) -> Result<TwoDetectorClicks> {
    check_prob("p", p)?;
    let (a1, b1) = (d1.alpha(), d1.beta());
    let (a2, b2) = (d2.alpha(), d2.beta());
    let r = 1.0 - p;
    Ok(TwoDetectorClicks {
        q00: p * b1 * (1.0 - a2) + r * (1.0 - a1) * b2,
        q01: p * b1 * a2 + r * (1.0 - a1) * (1.0 - b2),
        q10: p * (1.0 - b1) * (1.0 - a2) + r * a1 * b2,
        q11: p * (1.0 - b1) * a2 + r * a1 * (1.0 - b2),
    })
}

/// `(intercept, slope)` of q10, q01 and q00 + q11 as functions of `p`.
fn linear_factors(d1: &DetectorParams, d2: &DetectorParams) -> [(f64, f64); 3] {
    let (a1, b1) = (d1.alpha(), d1.beta());
    let (a2, b2) = (d2.alpha(), d2.beta());
    let q10 = (a1 * b2, (1.0 - b1) * (1.0 - a2) - a1 * b2);
    let q01 = ((1.0 - a1) * (1.0 - b2), b1 * a2 - (1.0 - a1) * (1.0 - b2));
    let c0 = (1.0 - a1) * b2 + a1 * (1.0 - b2);
    let c1 = b1 * (1.0 - a2) + (1.0 - b1) * a2;
    [q10, q01, (c0, c1 - c0)]
}

fn uniform_prior() -> NodeIntegrals {
    NodeIntegrals::scalar(0.0, 0.5, 1.0 / 3.0)
}

/// Posterior of `p` for two identical detectors with effective dark rate `a`,
/// `g1` and `g2` exclusive single clicks.
///
/// With no single-click events at all the uniform prior is returned.
pub fn equal_two_detector_posterior(g1: u64, g2: u64, a: f64) -> Result<PosteriorMoments> {
    Ok(equal_two_detector_node(g1, g2, a)?.into_moments())
}

/// Node integrals of the equal-detector posterior at effective dark rate `a`.
/// The normalization includes the Jacobian `1/(1-2a)`, so nodes at different
/// `a` are comparable.
pub fn equal_two_detector_node(g1: u64, g2: u64, a: f64) -> Result<NodeIntegrals> {
    if !(a.is_finite() && (0.0..0.5).contains(&a)) {
        return Err(Error::domain(format!(
            "effective dark rate must lie in [0, 1/2), got {a}"
        )));
    }
    if g1 + g2 == 0 {
        return Ok(uniform_prior());
    }
    let n = (g1 + g2) as f64;
    let (m1, m2, log_norm) = truncated_beta(g1 as f64, n, a, 1.0 - a)?;
    let w = 1.0 - 2.0 * a;
    let mu = (m1 - a) / w;
    let var = (m2 - m1 * m1) / (w * w);
    Ok(NodeIntegrals::scalar(log_norm - w.ln(), mu, var + mu * mu))
}

/// Result of [`unequal_two_detector_posterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnequalPosterior {
    pub moments: PosteriorMoments,
    /// ln ∫₀¹ Π (a_i + b_i p)^{g_i} dp
    pub log_j: f64,
    pub support: Support,
}

/// Posterior of `p` for two different detectors.
///
/// `g0` counts the runs where neither or both detectors clicked. When the
/// number of runs is unknown pass `None` and that factor is left out.
pub fn unequal_two_detector_posterior(
    g1: u64,
    g2: u64,
    g0: Option<u64>,
    d1: &DetectorParams,
    d2: &DetectorParams,
) -> Result<UnequalPosterior> {
    let g0 = g0.unwrap_or(0);
    if g1 + g2 + g0 == 0 {
        return Err(Error::domain("no counts: all of g1, g2, g0 are zero"));
    }
    let factors = linear_factors(d1, d2);
    let gs = [g1 as f64, g2 as f64, g0 as f64];
    let log_l = move |p: f64| -> f64 {
        let mut s = 0.0;
        for (&(c0, c1), &g) in factors.iter().zip(&gs) {
            if g > 0.0 {
                let q = c0 + c1 * p;
                if q <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                s += g * q.ln();
            }
        }
        s
    };
    let l1 = move |p: f64| log_l(p) + p.ln();
    let l2 = move |p: f64| log_l(p) + 2.0 * p.ln();
    let r = integrate_peaked_many(&[&log_l, &l1, &l2], 0.0, 1.0, QUAD_REL_TOL)?;
    let mu = (r[1].log_value - r[0].log_value).exp();
    let m2 = (r[2].log_value - r[0].log_value).exp();
    Ok(UnequalPosterior {
        moments: PosteriorMoments::binary(mu, m2),
        log_j: r[0].log_value,
        support: r[0].support,
    })
}

/// Result of [`k_outcome_posterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct KOutcomePosterior {
    pub moments: PosteriorMoments,
    /// Moments of the truncated-Dirichlet variable `R` before the affine map.
    pub r_moments: RMoments,
}

/// `ln Π [a + (1 - K a) p_i]^{g_i}`.
pub fn k_outcome_log_likelihood(counts: &[u64], p: &[f64], a: f64) -> f64 {
    let w = 1.0 - counts.len() as f64 * a;
    counts
        .iter()
        .zip(p)
        .map(|(&g, &pi)| if g == 0 { 0.0 } else { g as f64 * (a + w * pi).ln() })
        .sum()
}

/// Maps R-moments to moments of `p = (r - a)/(1 - K a)`.
pub(crate) fn p_from_r(r: &RMoments, a: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = r.mean.len();
    let w = 1.0 - k as f64 * a;
    let mean: Vec<f64> = r.mean.iter().map(|m| (m - a) / w).collect();
    let second = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    (r.second_origin[i][j] - a * r.mean[i] - a * r.mean[j] + a * a) / (w * w)
                })
                .collect()
        })
        .collect();
    (mean, second)
}

/// Rescales approximate moments so the means sum to one.
pub(crate) fn renormalize(mean: &mut [f64], second: &mut [Vec<f64>]) {
    let s: f64 = mean.iter().sum();
    if s > 0.0 && s.is_finite() {
        mean.iter_mut().for_each(|m| *m /= s);
        for row in second.iter_mut() {
            row.iter_mut().for_each(|v| *v /= s * s);
        }
    }
}

/// Posterior of the K outcome probabilities for identical detectors with
/// effective dark rate `a`.
///
/// Approximate normalizations make the means sum to one only approximately;
/// they are rescaled to do so exactly (`r_moments` keeps the raw values).
pub fn k_outcome_posterior(rec: &CountRecord, a: f64, method: Method) -> Result<KOutcomePosterior> {
    let alphas: Vec<f64> = rec.counts().iter().map(|&g| g as f64 + 1.0).collect();
    let td = TruncatedDirichlet::new(alphas, a)?;
    let r = td.moments(method)?;
    let (mut mean, mut second) = p_from_r(&r, a);
    renormalize(&mut mean, &mut second);
    Ok(KOutcomePosterior {
        moments: PosteriorMoments::from_raw(mean, second),
        r_moments: r,
    })
}

/// Measurement protocols compared by [`expected_posterior_sigma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    /// One detector, `N` runs.
    OneDetector,
    /// Two identical detectors, `N` runs, only exclusive single clicks kept.
    TwoDetector,
    /// Two identical detectors, runs repeated until `g1 + g2 = N`.
    TwoDetectorConstrained,
}

const PMF_FLOOR: f64 = 1e-15;

/// Posterior standard deviation of `p` averaged over the data distribution
/// when the true probability is `p_true`.
pub fn expected_posterior_sigma(p_true: f64, n: u64, params: &DetectorParams, setup: Setup) -> Result<f64> {
    check_prob("p_true", p_true)?;
    let terms: Vec<Result<f64>> = match setup {
        Setup::OneDetector => {
            let q = detection_prob(p_true, params)?;
            (0..=n)
                .into_par_iter()
                .map(|g| {
                    let w = log_binomial_pmf(g, n, q)?.exp();
                    if w < PMF_FLOOR {
                        return Ok(0.0);
                    }
                    Ok(w * single_detector_posterior(g, n, params)?.sigma())
                })
                .collect()
        }
        Setup::TwoDetector => {
            let a = effective_dark_rate(params, params, 2)?;
            let c = two_detector_click_probs(p_true, params, params)?;
            let probs = [c.q10, c.q01, c.q00 + c.q11];
            (0..=n)
                .into_par_iter()
                .flat_map_iter(|g1| (0..=n - g1).map(move |g2| (g1, g2)))
                .map(|(g1, g2)| {
                    let w = multinomial_pmf(&[g1, g2, n - g1 - g2], &probs)?;
                    if w < PMF_FLOOR {
                        return Ok(0.0);
                    }
                    Ok(w * equal_two_detector_posterior(g1, g2, a)?.sigma())
                })
                .collect()
        }
        Setup::TwoDetectorConstrained => {
            let a = effective_dark_rate(params, params, 2)?;
            let c = two_detector_click_probs(p_true, params, params)?;
            let q = c.q10 / (c.q10 + c.q01);
            (0..=n)
                .into_par_iter()
                .map(|g1| {
                    let w = log_binomial_pmf(g1, n, q)?.exp();
                    if w < PMF_FLOOR {
                        return Ok(0.0);
                    }
                    Ok(w * equal_two_detector_posterior(g1, n - g1, a)?.sigma())
                })
                .collect()
        }
    };
    // sequential sum in index order keeps the result schedule-independent
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_quad;

    fn det(alpha: f64, beta: f64) -> DetectorParams {
        DetectorParams::from_alpha_beta(alpha, beta).unwrap()
    }

    #[test]
    fn detection_prob_examples() {
        let d = det(0.1, 0.2);
        assert!((detection_prob(0.0, &d).unwrap() - 0.1).abs() < 1e-15);
        assert!((detection_prob(1.0, &d).unwrap() - 0.8).abs() < 1e-15);
        assert!((detection_prob(0.5, &d).unwrap() - 0.45).abs() < 1e-15);
        assert!(detection_prob(1.5, &d).is_err());
    }

    #[test]
    fn single_detector_untruncated() {
        let m = single_detector_posterior(3, 8, &DetectorParams::perfect()).unwrap();
        assert!((m.mu() - 0.4).abs() < 1e-14);
        let var: f64 = 20.0 / 110.0 - 0.16;
        assert!((m.sigma() - var.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn single_detector_matches_quadrature() {
        let d = det(0.1, 0.2);
        let (g, n) = (50.0, 100.0);
        let lik = |p: f64| {
            let q = 0.1 + 0.7 * p;
            (g * f64::ln(q) + (n - g) * (-q).ln_1p()).exp()
        };
        let z = adaptive_quad(lik, 0.0, 1.0, 1e-13).unwrap();
        let m1 = adaptive_quad(|p| p * lik(p), 0.0, 1.0, 1e-13).unwrap() / z;
        let m2 = adaptive_quad(|p| p * p * lik(p), 0.0, 1.0, 1e-13).unwrap() / z;
        let m = single_detector_posterior(50, 100, &d).unwrap();
        assert!((m.mu() - m1).abs() < 1e-8);
        assert!((m.sigma() - (m2 - m1 * m1).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn single_detector_plateau_stays_positive() {
        let d = det(0.1, 0.2);
        let m = single_detector_posterior(800, 10_000, &d).unwrap();
        assert!(m.mu() > 0.0 && m.mu() < 0.01, "{}", m.mu());
    }

    #[test]
    fn single_detector_rejects_blind_detector() {
        let d = det(0.5, 0.5);
        assert!(matches!(single_detector_posterior(1, 2, &d), Err(Error::Domain(_))));
        assert!(single_detector_posterior(3, 2, &det(0.1, 0.2)).is_err());
    }

    #[test]
    fn effective_dark_rate_examples() {
        let d = det(0.1, 0.2);
        let a = effective_dark_rate(&d, &d, 2).unwrap();
        assert!((a - 0.02 / 0.74).abs() < 1e-15);
        assert!(a >= 0.02 && a <= 0.04);
        let z = det(0.0, 0.3);
        assert_eq!(effective_dark_rate(&z, &z, 4).unwrap(), 0.0);
        let other = det(0.05, 0.2);
        assert!(matches!(effective_dark_rate(&d, &other, 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn click_probs_examples() {
        let p = DetectorParams::perfect();
        let c = two_detector_click_probs(0.7, &p, &p).unwrap();
        for (got, want) in [(c.q00, 0.0), (c.q01, 0.3), (c.q10, 0.7), (c.q11, 0.0)] {
            assert!((got - want).abs() < 1e-15);
        }
        let d = det(0.1, 0.2);
        for &p in &[0.0, 0.5, 1.0] {
            let c = two_detector_click_probs(p, &d, &d).unwrap();
            assert!((c.q00 + c.q11 - 0.26).abs() < 1e-15);
            assert!((c.q00 + c.q01 + c.q10 + c.q11 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_detector_limits() {
        let m = equal_two_detector_posterior(12, 5, 0.0).unwrap();
        let s = single_detector_posterior(12, 17, &DetectorParams::perfect()).unwrap();
        assert!((m.mu() - s.mu()).abs() < 1e-14);
        assert!((m.sigma() - s.sigma()).abs() < 1e-14);
        let m = equal_two_detector_posterior(40, 40, 0.027).unwrap();
        assert!((m.mu() - 0.5).abs() < 1e-13);
        let m = equal_two_detector_posterior(0, 0, 0.1).unwrap();
        assert_eq!(m.mu(), 0.5);
        assert!(equal_two_detector_posterior(3, 4, 0.5).is_err());
    }

    #[test]
    fn unequal_reduces_to_equal() {
        let d = det(0.1, 0.2);
        let a = effective_dark_rate(&d, &d, 2).unwrap();
        let eq = equal_two_detector_posterior(70, 30, a).unwrap();
        let un = unequal_two_detector_posterior(70, 30, Some(50), &d, &d).unwrap();
        assert!((eq.mu() - un.moments.mu()).abs() < 1e-8);
        assert!((eq.sigma() - un.moments.sigma()).abs() < 1e-8);
        let p = DetectorParams::perfect();
        let un = unequal_two_detector_posterior(9, 3, None, &p, &p).unwrap();
        assert!((un.moments.mu() - 10.0 / 14.0).abs() < 1e-9);
        assert!(unequal_two_detector_posterior(0, 0, Some(0), &d, &d).is_err());
    }

    #[test]
    fn k_outcome_untruncated_is_dirichlet() {
        let rec = CountRecord::new(vec![3, 5, 1], Some(20)).unwrap();
        let r = k_outcome_posterior(&rec, 0.0, Method::SaddleQuad).unwrap();
        assert!((r.moments.mean[0] - 4.0 / 12.0).abs() < 1e-15);
        assert!((r.moments.second_origin[1][1] - 6.0 * 7.0 / (12.0 * 13.0)).abs() < 1e-15);
        assert!(matches!(
            k_outcome_posterior(&rec, 0.34, Method::SaddleQuad),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn k_outcome_two_matches_equal_path() {
        let rec = CountRecord::new(vec![70, 30], None).unwrap();
        let a = 0.027_027;
        let k = k_outcome_posterior(&rec, a, Method::SaddleQuad).unwrap();
        let e = equal_two_detector_posterior(70, 30, a).unwrap();
        assert!((k.moments.mu() - e.mu()).abs() < 1e-7);
        assert!((k.moments.sigma() - e.sigma()).abs() < 1e-6);
    }

    #[test]
    fn count_record_validation() {
        assert!(CountRecord::new(vec![], None).is_err());
        assert!(CountRecord::new(vec![5, 6], Some(10)).is_err());
        assert_eq!(CountRecord::new(vec![5, 5], Some(10)).unwrap().total(), 10);
    }
}
