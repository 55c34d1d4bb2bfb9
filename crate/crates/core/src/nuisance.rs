//! Marginalizing an imprecisely known detector parameter.
//!
//! The parameter `y` is described by its mean, standard deviation and
//! (optionally) skewness. Expectations over its Edgeworth density are
//! replaced by small fixed quadrature rules:
//!
//! * order 3: nodes `mu ± sigma`, weights 1/2, 1/2;
//! * order 4: nodes `mu - 3 sigma, mu - sigma, mu + sigma, mu + 3 sigma`
//!   with weights `-skew/48, 1/2 + skew/16, 1/2 - skew/16, skew/48`.
//!
//! Posterior moments are ratios of weighted sums: numerator and
//! denominator are each summed over the nodes before dividing.

use rayon::prelude::*;

use crate::moments::PosteriorMoments;
use crate::specfun::{ln_beta_unchecked, log_gen_reg_inc_beta};
use crate::{Error, Result};

/// Mean, standard deviation and skewness of a nuisance parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpreciseParam {
    pub mu: f64,
    pub sigma: f64,
    pub skew: f64,
}

impl ImpreciseParam {
    pub fn new(mu: f64, sigma: f64, skew: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("parameter mean must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("parameter sigma must be positive, got {sigma}")));
        }
        if !(skew.is_finite() && skew.abs() <= 2.0) {
            return Err(Error::domain(format!(
                "skewness must satisfy |skew| <= 2, got {skew}"
            )));
        }
        Ok(Self { mu, sigma, skew })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeworthOrder {
    Three,
    Four,
}

impl TryFrom<u32> for EdgeworthOrder {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self> {
        match m {
            3 => Ok(EdgeworthOrder::Three),
            4 => Ok(EdgeworthOrder::Four),
            _ => Err(Error::domain(format!("Edgeworth order must be 3 or 4, got {m}"))),
        }
    }
}

pub fn edgeworth_nodes(ip: &ImpreciseParam, order: EdgeworthOrder) -> (Vec<f64>, Vec<f64>) {
    let (mu, s, g) = (ip.mu, ip.sigma, ip.skew);
    match order {
        EdgeworthOrder::Three => (vec![mu - s, mu + s], vec![0.5, 0.5]),
        EdgeworthOrder::Four => (
            vec![mu - 3.0 * s, mu - s, mu + s, mu + 3.0 * s],
            vec![-g / 48.0, 0.5 + g / 16.0, 0.5 - g / 16.0, g / 48.0],
        ),
    }
}

/// Posterior summary at one fixed parameter value: the log marginal
/// likelihood and the normalized first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeIntegrals {
    pub log_norm: f64,
    pub mean: Vec<f64>,
    pub second_origin: Vec<Vec<f64>>,
}

impl NodeIntegrals {
    /// Two-outcome node from the moments of `p`.
    pub fn scalar(log_norm: f64, m1: f64, m2: f64) -> Self {
        let pm = PosteriorMoments::binary(m1, m2);
        Self {
            log_norm,
            mean: pm.mean,
            second_origin: pm.second_origin,
        }
    }

    pub fn into_moments(self) -> PosteriorMoments {
        PosteriorMoments::from_raw(self.mean, self.second_origin)
    }
}

/// Closed range of physically meaningful parameter values. Nodes outside it
/// are clamped onto the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDomain {
    pub lo: f64,
    pub hi: f64,
}

impl ParamDomain {
    pub const UNBOUNDED: ParamDomain = ParamDomain {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn nonnegative() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginalized {
    pub moments: PosteriorMoments,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub node_log_norms: Vec<f64>,
    /// Some node fell outside the parameter domain and was clamped.
    pub clamped: bool,
}

/// Integrates the nuisance parameter out of a posterior.
///
/// `kernel(y)` returns the posterior summary at parameter value `y`.
/// Nodes with zero weight are not evaluated.
pub fn marginalize_posterior<F>(
    kernel: F,
    ip: &ImpreciseParam,
    order: EdgeworthOrder,
    domain: ParamDomain,
) -> Result<Marginalized>
where
    F: Fn(f64) -> Result<NodeIntegrals> + Sync,
{
    let (raw_nodes, weights) = edgeworth_nodes(ip, order);
    let mut clamped = false;
    let nodes: Vec<f64> = raw_nodes
        .iter()
        .map(|&y| {
            let c = y.clamp(domain.lo, domain.hi);
            clamped |= c != y;
            c
        })
        .collect();
    let evaluated: Vec<Option<NodeIntegrals>> = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&y, &w)| if w == 0.0 { Ok(None) } else { kernel(y).map(Some) })
        .collect::<Result<_>>()?;

    let shift = evaluated
        .iter()
        .flatten()
        .map(|n| n.log_norm)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::numeric("marginal likelihood vanishes at every node", None));
    }
    let k = evaluated.iter().flatten().next().map_or(0, |n| n.mean.len());
    let mut den = 0.0;
    let mut mean = vec![0.0; k];
    let mut second = vec![vec![0.0; k]; k];
    for (node, &w) in evaluated.iter().zip(&weights) {
        let Some(node) = node else { continue };
        let z = w * (node.log_norm - shift).exp();
        den += z;
        for i in 0..k {
            mean[i] += z * node.mean[i];
            for j in 0..k {
                second[i][j] += z * node.second_origin[i][j];
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::numeric(
            format!("weighted marginal likelihood is not positive ({den})"),
            None,
        ));
    }
    mean.iter_mut().for_each(|m| *m /= den);
    second.iter_mut().flatten().for_each(|v| *v /= den);
    Ok(Marginalized {
        moments: PosteriorMoments::from_raw(mean, second),
        node_log_norms: evaluated
            .iter()
            .map(|n| n.as_ref().map_or(f64::NEG_INFINITY, |n| n.log_norm))
            .collect(),
        nodes,
        weights,
        clamped,
    })
}

/// ln of the unnormalized density of the effective dark rate `a` after
/// observing `g` single clicks out of `n` exclusive events:
/// `B(a, 1-a; g+1, n-g+1) / (1 - 2a)`.
pub fn dark_rate_log_pdf(a: f64, g: u64, n: u64) -> Result<f64> {
    if !(a.is_finite() && (0.0..0.5).contains(&a)) {
        return Err(Error::domain(format!("dark rate must lie in [0, 1/2), got {a}")));
    }
    if g > n {
        return Err(Error::domain(format!("g={g} exceeds N={n}")));
    }
    let (x, y) = (g as f64 + 1.0, (n - g) as f64 + 1.0);
    Ok(log_gen_reg_inc_beta(a, 1.0 - a, x, y)? + ln_beta_unchecked(x, y) - (-2.0 * a).ln_1p())
}

pub fn dark_rate_pdf(a: f64, g: u64, n: u64) -> Result<f64> {
    Ok(dark_rate_log_pdf(a, g, n)?.exp())
}

/// Upper bound `(g + 1 + 3 sqrt(g + 1)) / N` on the dark rate.
pub fn dark_rate_bound(g: u64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("number of runs must be at least 1"));
    }
    let x = g as f64 + 1.0;
    Ok((x + 3.0 * x.sqrt()) / n as f64)
}
