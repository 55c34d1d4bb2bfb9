//! Continuous-wave experiments with Poissonian counts.
//!
//! With dark rate `alpha` per interval and an unknown beam intensity `A`
//! (efficiency absorbed into `A`), the count vector is multinomial given its
//! total `N`, with cell probabilities `y + (1 - K y) p_i / b` where
//! `y = alpha / (K alpha + A b)`. Integrating `A` out leaves `y` as a nuisance
//! parameter with known mean, spread and skewness. It is marginalized with
//! the Edgeworth rules from [`crate::nuisance`], and the truncated-Dirichlet
//! machinery handles each node.

use crate::distributions::{dirichlet_second_origin, DirichletParams};
use crate::moments::PosteriorMoments;
use crate::nuisance::{marginalize_posterior, EdgeworthOrder, ImpreciseParam, NodeIntegrals, ParamDomain};
use crate::pulsed_inference::{p_from_r, renormalize};
use crate::truncated_dirichlet::{Method, TruncatedDirichlet};
use crate::{Error, Result};

/// Sum of the POVM elements: either `b` times the identity, or an operator
/// with eigenvalues in `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PovmSum {
    Scalar(f64),
    EigenRange { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwExperiment {
    pub counts: Vec<u64>,
    pub alpha: f64,
    pub povm: PovmSum,
}

impl CwExperiment {
    pub fn new(counts: Vec<u64>, alpha: f64, povm: PovmSum) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::domain("need counts for at least two outcomes"));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::domain("total count N must be at least 1"));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::domain(format!("dark rate must be >= 0, got {alpha}")));
        }
        match povm {
            PovmSum::Scalar(b) if !(b.is_finite() && b > 0.0) => {
                return Err(Error::domain(format!("b must be positive, got {b}")));
            }
            PovmSum::EigenRange { min, max } if !(min >= 0.0 && min <= max && max > 0.0 && max.is_finite()) => {
                return Err(Error::domain(format!(
                    "eigenvalue range must satisfy 0 <= min <= max, max > 0, got [{min}, {max}]"
                )));
            }
            _ => {}
        }
        Ok(Self { counts, alpha, povm })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }
}

/// Mean, standard deviation, skewness and mode of `Y = alpha / X` with
/// `X ~ Gamma(N + 1)`, the law of the total rate given `N` counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YStats {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub mode: f64,
}

impl YStats {
    pub fn imprecise(&self) -> Result<ImpreciseParam> {
        ImpreciseParam::new(self.mean, self.std, self.skew)
    }
}

pub fn y_stats(n: u64, alpha: f64) -> Result<YStats> {
    if n < 3 {
        return Err(Error::domain(format!(
            "moments of the effective dark rate need N >= 3, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(YStats {
        mean: alpha / nf,
        std: alpha / (nf * (nf - 1.0).sqrt()),
        skew: 4.0 * (nf - 1.0).sqrt() / (nf - 2.0),
        mode: alpha / (nf + 2.0),
    })
}

/// True when the truncated gamma factor is indistinguishable from the full
/// one: `N >= 1 + K alpha + 3 sqrt(K alpha)`.
pub fn truncation_negligible(n: u64, k: usize, alpha: f64) -> bool {
    let ka = k as f64 * alpha;
    n as f64 >= 1.0 + ka + 3.0 * ka.sqrt()
}

/// `ln Π [y + (1 - K y) p_i / b]^{g_i}`.
pub fn cw_log_likelihood(counts: &[u64], p: &[f64], y: f64, b: f64) -> f64 {
    let w = 1.0 - counts.len() as f64 * y;
    counts
        .iter()
        .zip(p)
        .map(|(&g, &pi)| if g == 0 { 0.0 } else { g as f64 * (y + w * pi / b).ln() })
        .sum()
}

/// Multipliers `(phi1, phi2)` for a POVM sum with eigenvalues in
/// `[m_min, m_max]`. With `r = m_min / m_max`,
/// `phi1 = K/(K+1) (1 - r^(K+1)) / (1 - r^K)` and
/// `phi2 = K/(K+2) (1 - r^(K+2)) / (1 - r^K)`.
pub fn povm_scale_factors(m_min: f64, m_max: f64, k: usize) -> Result<(f64, f64)> {
    if !(m_max.is_finite() && m_max > 0.0) {
        return Err(Error::domain(format!("largest eigenvalue must be positive, got {m_max}")));
    }
    if !(m_min >= 0.0 && m_min <= m_max) {
        return Err(Error::domain(format!(
            "smallest eigenvalue must lie in [0, {m_max}], got {m_min}"
        )));
    }
    if k == 0 {
        return Err(Error::domain("K must be at least 1"));
    }
    let r = m_min / m_max;
    // (1 - r^n)/(1 - r) as a finite geometric sum, exact at r = 1
    let geo = |n: usize| -> f64 {
        let mut s = 0.0;
        let mut t = 1.0;
        for _ in 0..n {
            s += t;
            t *= r;
        }
        s
    };
    let kf = k as f64;
    let sk = geo(k);
    Ok((kf / (kf + 1.0) * geo(k + 1) / sk, kf / (kf + 2.0) * geo(k + 2) / sk))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwPosterior {
    pub moments: PosteriorMoments,
    pub y: Option<YStats>,
    pub nodes: Vec<f64>,
    pub node_log_norms: Vec<f64>,
    pub clamped: bool,
}

/// Node integrals of the CW posterior in the variable `t = p / b` at
/// effective dark rate `y`.
fn cw_node(counts: &[u64], y: f64, method: Method) -> Result<NodeIntegrals> {
    let k = counts.len();
    if k as f64 * y >= 1.0 {
        return Err(Error::domain(format!(
            "Edgeworth node y = {y} violates K y < 1 for K = {k}"
        )));
    }
    let alphas: Vec<f64> = counts.iter().map(|&g| g as f64 + 1.0).collect();
    let td = TruncatedDirichlet::new(alphas, y)?;
    let r = td.moments(method)?;
    let (mut mean, mut second) = p_from_r(&r, y);
    renormalize(&mut mean, &mut second);
    let log_norm = r.log_j[0] - (k as f64 - 1.0) * (-(k as f64) * y).ln_1p();
    Ok(NodeIntegrals {
        log_norm,
        mean,
        second_origin: second,
    })
}

/// Posterior moments of the outcome probabilities of a CW experiment.
///
/// Refuses data whose total count is too small for the untruncated
/// treatment of the beam intensity.
pub fn cw_posterior(exp: &CwExperiment, order: EdgeworthOrder, method: Method) -> Result<CwPosterior> {
    let n = exp.total();
    let k = exp.k();
    if !truncation_negligible(n, k, exp.alpha) {
        return Err(Error::domain(format!(
            "total count N = {n} is below 1 + K*alpha + 3*sqrt(K*alpha) = {:.4}; the CW treatment needs N >= 1 + K alpha + 3 sqrt(K alpha)",
            1.0 + k as f64 * exp.alpha + 3.0 * (k as f64 * exp.alpha).sqrt()
        )));
    }
    let (scale1, scale2) = match exp.povm {
        PovmSum::Scalar(b) => (b, b * b),
        PovmSum::EigenRange { min, max } => {
            let (phi1, phi2) = povm_scale_factors(min, max, k)?;
            (max * phi1, max * max * phi2)
        }
    };
    let (t_moments, y, nodes, norms, clamped) = if exp.alpha == 0.0 {
        let d = DirichletParams::from_counts(&exp.counts)?;
        let mean = d.alphas().iter().map(|a| a / d.alpha0()).collect();
        let pm = PosteriorMoments::from_raw(mean, dirichlet_second_origin(&d));
        (pm, None, vec![0.0], vec![0.0], false)
    } else {
        let ys = y_stats(n, exp.alpha)?;
        let ip = ys.imprecise()?;
        let counts = &exp.counts;
        let m = marginalize_posterior(
            |y| cw_node(counts, y, method),
            &ip,
            order,
            ParamDomain::nonnegative(),
        )?;
        (m.moments, Some(ys), m.nodes, m.node_log_norms, m.clamped)
    };
    let mean = t_moments.mean.iter().map(|v| v * scale1).collect();
    let second = t_moments
        .second_origin
        .iter()
        .map(|row| row.iter().map(|v| v * scale2).collect())
        .collect();
    Ok(CwPosterior {
        moments: PosteriorMoments::from_raw(mean, second),
        y,
        nodes,
        node_log_norms: norms,
        clamped,
    })
}
