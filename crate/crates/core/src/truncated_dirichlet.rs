//! Truncated Dirichlet distribution: `Dir(alpha)` restricted to `x_i >= a`.
//!
//! The normalization `J(alpha; a) = Pr(X >= a)` for `X ~ Dir(alpha)` follows
//! from the gamma representation `X = Z / sum(Z)`:
//!
//! `J = f_T(1) * prod Q(alpha_i, a) * e * Gamma(alpha0)`,
//!
//! where `f_T` is the density of `sum(Z)` given every `Z_i >= a`. The factors
//! `Q(alpha_i, a)` cancel against the denominators of the conditional MGF,
//! so only the numerator `M(s) = prod (1-s)^(-alpha_i) Q(alpha_i, (1-s) a)` is
//! ever evaluated. `f_T(1)` is obtained by a saddle-point inversion of `M`:
//! either by integrating along the vertical line through the saddle point or
//! by the second-order Taylor formula. A product of incomplete beta functions
//! gives a cheaper, rougher estimate.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::quadrature::{adaptive_quad_with, QuadOptions};
use crate::specfun::{
    ln_gamma_unchecked, log_gen_reg_inc_beta, log_reg_gamma_q, log_reg_gamma_q_complex,
    log_reg_inc_beta_upper, upper_gamma_hazard, AccuracyPolicy,
};
use crate::{Error, Result};

/// How the normalization integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Saddle-point contour integral, evaluated by quadrature. Most accurate.
    SaddleQuad,
    /// Second-order saddle-point (Daniels) formula.
    SaddleTaylor,
    /// `prod_i I_{1-a}(alpha0 - alpha_i, alpha_i)`. Fastest, least accurate.
    BetaProduct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SaddleQuad => "saddle-quad",
            Method::SaddleTaylor => "saddle-taylor",
            Method::BetaProduct => "beta-product",
        }
    }

    /// Default choice for `k` outcomes.
    pub fn default_for(k: usize) -> Self {
        match k {
            0..=4 => Method::SaddleQuad,
            5..=8 => Method::SaddleTaylor,
            _ => Method::BetaProduct,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saddle-quad" => Ok(Method::SaddleQuad),
            "saddle-taylor" => Ok(Method::SaddleTaylor),
            "beta-product" => Ok(Method::BetaProduct),
            other => Err(Error::domain(format!(
                "unknown method '{other}' (expected saddle-quad, saddle-taylor or beta-product)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDirichlet {
    alphas: Vec<f64>,
    a: f64,
    alpha0: f64,
}

/// Cumulant generating function of `sum(Z)` given `Z >= a`, and its first
/// four derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgfDerivs {
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleState {
    pub s_hat: f64,
    /// `1 - s_hat`
    pub v_hat: f64,
    /// `a * (1 - s_hat)`
    pub u_hat: f64,
    /// ln of the MGF numerator at the saddle point
    pub log_mgf_num: f64,
    pub derivs: CgfDerivs,
    /// `|K'(s_hat) - 1|`
    pub residual: f64,
}

/// ln J together with the saddle residual, when a saddle point was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub log_j: f64,
    pub residual: Option<f64>,
}

/// Moments about the origin of `R ~ TruncDir(alpha; a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RMoments {
    pub method: Method,
    pub mean: Vec<f64>,
    pub second_origin: Vec<Vec<f64>>,
    /// ln J for the base parameters, then `alpha + e_i` (i = 0..K), then
    /// `alpha + e_i + e_j` for `i <= j` in row-major order.
    pub log_j: Vec<f64>,
    pub max_residual: Option<f64>,
}

/// Per-component hazard `g` and the derivatives of `phi = (alpha + g)/u`.
fn phi_derivs(alpha: f64, u: f64) -> Result<[f64; 4]> {
    let g = upper_gamma_hazard(alpha, u)?;
    let phi = (alpha + g) / u;
    let g1 = g * (phi - 1.0);
    let phi1 = (g1 - phi) / u;
    let g2 = g1 * (phi - 1.0) + g * phi1;
    let phi2 = (g2 - 2.0 * phi1) / u;
    let g3 = g2 * (phi - 1.0) + 2.0 * g1 * phi1 + g * phi2;
    let phi3 = (g3 - 3.0 * phi2) / u;
    Ok([phi, phi1, phi2, phi3])
}

const SADDLE_TOL: f64 = 1e-10;
const TAIL_ENVELOPE: f64 = 1e-13;

impl TruncatedDirichlet {
    pub fn new(alphas: Vec<f64>, a: f64) -> Result<Self> {
        let k = alphas.len();
        if k < 2 {
            return Err(Error::domain("truncated Dirichlet needs at least two components"));
        }
        if let Some(bad) = alphas.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::domain(format!(
                "Dirichlet parameters must be positive, got {bad}"
            )));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::domain(format!("truncation level must be >= 0, got {a}")));
        }
        if k as f64 * a >= 1.0 {
            return Err(Error::domain(format!(
                "truncation level exceeds 1/K (a = {a}, K = {k})"
            )));
        }
        let alpha0 = alphas.iter().sum();
        Ok(Self { alphas, a, alpha0 })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    fn shifted(&self, bumps: &[usize]) -> Self {
        let mut alphas = self.alphas.clone();
        for &i in bumps {
            alphas[i] += 1.0;
        }
        let alpha0 = alphas.iter().sum();
        Self {
            alphas,
            a: self.a,
            alpha0,
        }
    }

    fn cgf_at(&self, v: f64) -> Result<(f64, CgfDerivs)> {
        let a0 = self.alpha0;
        if self.a == 0.0 {
            let log_num = -a0 * v.ln();
            let d = CgfDerivs {
                k: log_num,
                k1: a0 / v,
                k2: a0 / (v * v),
                k3: 2.0 * a0 / v.powi(3),
                k4: 6.0 * a0 / v.powi(4),
            };
            return Ok((log_num, d));
        }
        let a = self.a;
        let u = a * v;
        let mut log_num = 0.0;
        let mut log_den = 0.0;
        let mut f = [0.0; 4];
        for &alpha in &self.alphas {
            log_num += -alpha * v.ln() + log_reg_gamma_q(alpha, u)?;
            log_den += log_reg_gamma_q(alpha, a)?;
            let p = phi_derivs(alpha, u)?;
            for (acc, x) in f.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let d = CgfDerivs {
            k: log_num - log_den,
            k1: a * f[0],
            k2: -a * a * f[1],
            k3: a.powi(3) * f[2],
            k4: -a.powi(4) * f[3],
        };
        Ok((log_num, d))
    }

    /// `K_T(s)` and its first four derivatives, for `s < 1`.
    pub fn cgf_derivs(&self, s: f64) -> Result<CgfDerivs> {
        if !(s < 1.0) {
            return Err(Error::domain(format!("CGF is defined for s < 1, got {s}")));
        }
        Ok(self.cgf_at(1.0 - s)?.1)
    }

    /// Root `u` of `u/a = alpha0 + sum max(0, u - (alpha_i - 1))`, a lower
    /// bound for the exact saddle point in the variable `u = a(1 - s)`.
    pub fn piecewise_linear_saddle(&self) -> f64 {
        let a = self.a;
        if a == 0.0 {
            return 0.0;
        }
        let mut c: Vec<f64> = self.alphas.iter().map(|x| x - 1.0).collect();
        c.sort_by(f64::total_cmp);
        let inv_a = 1.0 / a;
        let mut prefix = 0.0;
        for m in 0..=c.len() {
            let u = (self.alpha0 - prefix) / (inv_a - m as f64);
            let lower = if m == 0 { f64::NEG_INFINITY } else { c[m - 1] };
            let upper = if m == c.len() { f64::INFINITY } else { c[m] };
            if u >= lower && u <= upper {
                return u.max(0.0);
            }
            if m < c.len() {
                prefix += c[m];
            }
        }
        // unreachable for K a < 1: the left side grows faster than the right
        self.alpha0 / (inv_a - c.len() as f64)
    }

    fn saddle_h(&self, u: f64) -> Result<(f64, f64)> {
        let mut h = u / self.a - self.alpha0;
        let mut dh = 1.0 / self.a;
        for &alpha in &self.alphas {
            let g = upper_gamma_hazard(alpha, u)?;
            h -= g;
            dh -= g * ((alpha + g) / u - 1.0);
        }
        Ok((h, dh))
    }

    /// Real root of `K'(s) = 1`.
    pub fn solve_saddle(&self) -> Result<SaddleState> {
        let v = if self.a == 0.0 {
            self.alpha0
        } else {
            self.a_positive_root()? / self.a
        };
        let (log_num, derivs) = self.cgf_at(v)?;
        let residual = (derivs.k1 - 1.0).abs();
        if !(residual <= SADDLE_TOL) || !(derivs.k2 > 0.0) {
            return Err(Error::numeric(
                format!("saddle point residual {residual:.3e} above tolerance"),
                None,
            ));
        }
        Ok(SaddleState {
            s_hat: 1.0 - v,
            v_hat: v,
            u_hat: self.a * v,
            log_mgf_num: log_num,
            derivs,
            residual,
        })
    }

    fn a_positive_root(&self) -> Result<f64> {
        let u_pl = self.piecewise_linear_saddle().max(f64::MIN_POSITIVE);
        let (mut lo, mut hi);
        if self.saddle_h(u_pl)?.0 > 0.0 {
            lo = 0.0;
            hi = u_pl;
        } else {
            lo = u_pl;
            let k = self.k() as f64;
            hi = (self.alpha0 / (1.0 / self.a - k)).max(u_pl) * 1.01;
            let mut tries = 0;
            while self.saddle_h(hi)?.0 <= 0.0 {
                lo = hi;
                hi *= 2.0;
                tries += 1;
                if tries > 200 {
                    return Err(Error::numeric("saddle point could not be bracketed", None));
                }
            }
        }
        let mut u = if lo > 0.0 { lo } else { 0.5 * hi };
        for _ in 0..200 {
            let (h, dh) = self.saddle_h(u)?;
            if (self.a * h / u).abs() <= 1e-14 {
                return Ok(u);
            }
            if h < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let newton = u - h / dh;
            u = if dh > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(u);
            }
        }
        Ok(u)
    }

    /// ln of the density of `sum(Z)` at 1 built from the uncancelled MGF,
    /// by the second-order saddle-point formula.
    pub fn log_density_taylor(&self, st: &SaddleState) -> Result<f64> {
        let d = &st.derivs;
        let corr = 1.0 + d.k4 / (8.0 * d.k2 * d.k2) - 5.0 * d.k3 * d.k3 / (24.0 * d.k2.powi(3));
        if !(corr > 0.0) {
            return Err(Error::numeric(
                format!("saddle-point correction factor {corr} is not positive"),
                None,
            ));
        }
        Ok(st.log_mgf_num - st.s_hat - 0.5 * (2.0 * std::f64::consts::PI * d.k2).ln() + corr.ln())
    }

    /// Leading-order saddle-point density, without the correction factor.
    pub fn log_density_leading(&self, st: &SaddleState) -> f64 {
        st.log_mgf_num - st.s_hat - 0.5 * (2.0 * std::f64::consts::PI * st.derivs.k2).ln()
    }

    /// `ln M(s_hat + i y) - ln M(s_hat) - i y`.
    fn contour_exponent(&self, st: &SaddleState, y: f64, policy: &AccuracyPolicy) -> Result<Complex64> {
        let v = st.v_hat;
        let t = y / v;
        let mut sum = Complex64::new(0.0, -y);
        let log_mod = -0.5 * (t * t).ln_1p();
        let arg = t.atan();
        for &alpha in &self.alphas {
            sum += Complex64::new(alpha * log_mod, alpha * arg);
            if self.a > 0.0 {
                let z = Complex64::new(self.a * v, -self.a * y);
                sum += log_reg_gamma_q_complex(alpha, z, policy)? - log_reg_gamma_q(alpha, st.u_hat)?;
            }
        }
        Ok(sum)
    }

    /// ln of the density of `sum(Z)` at 1 built from the uncancelled MGF,
    /// by integrating the inversion formula along `Re s = s_hat`.
    pub fn log_density_quad(&self, st: &SaddleState) -> Result<f64> {
        let policy = AccuracyPolicy::default();
        let width = 1.0 / st.derivs.k2.sqrt();
        let mut upper = 8.0 * width;
        while upper < 1024.0 * width
            && self.contour_exponent(st, upper, &policy)?.re.exp() > TAIL_ENVELOPE
        {
            upper *= 2.0;
        }
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let integrand = |y: f64| match self.contour_exponent(st, y, &policy) {
            Ok(e) => e.exp().re,
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                0.0
            }
        };
        let opts = QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-13 * width,
            ..QuadOptions::default()
        };
        let integral = adaptive_quad_with(integrand, 0.0, upper, &opts)?.value;
        if let Some(err) = failure.into_inner() {
            return Err(err);
        }
        if !(integral > 0.0) {
            return Err(Error::numeric(
                format!("saddle-point contour integral is not positive ({integral})"),
                None,
            ));
        }
        Ok(st.log_mgf_num - st.s_hat + (integral / std::f64::consts::PI).ln())
    }

    /// `ln prod_i I_{1-a}(alpha0 - alpha_i, alpha_i)`.
    pub fn log_product_beta_approx(&self) -> Result<f64> {
        let mut s = 0.0;
        for &alpha in &self.alphas {
            s += log_reg_inc_beta_upper(self.a, alpha, self.alpha0 - alpha)?;
        }
        Ok(s)
    }

    pub fn product_beta_approx(&self) -> Result<f64> {
        Ok(self.log_product_beta_approx()?.exp())
    }

    /// Exact ln J for two components: `ln I_{a, 1-a}(alpha_1, alpha_2)`.
    pub fn exact_log_normalization_k2(&self) -> Result<f64> {
        if self.k() != 2 {
            return Err(Error::Unsupported("closed form exists only for K = 2".into()));
        }
        log_gen_reg_inc_beta(self.a, 1.0 - self.a, self.alphas[0], self.alphas[1])
    }

    fn assemble(&self, log_f: f64) -> f64 {
        (log_f + 1.0 + ln_gamma_unchecked(self.alpha0)).min(0.0)
    }

    /// `ln J(alpha; a)`.
    pub fn log_normalization(&self, method: Method) -> Result<Normalization> {
        if self.a == 0.0 {
            return Ok(Normalization {
                log_j: 0.0,
                residual: None,
            });
        }
        match method {
            Method::BetaProduct => Ok(Normalization {
                log_j: self.log_product_beta_approx()?,
                residual: None,
            }),
            Method::SaddleTaylor | Method::SaddleQuad => {
                let st = self.solve_saddle()?;
                let log_f = if method == Method::SaddleQuad {
                    self.log_density_quad(&st)?
                } else {
                    self.log_density_taylor(&st)?
                };
                Ok(Normalization {
                    log_j: self.assemble(log_f),
                    residual: Some(st.residual),
                })
            }
        }
    }

    pub fn normalization(&self, method: Method) -> Result<f64> {
        Ok(self.log_normalization(method)?.log_j.exp())
    }

    /// First and second moments about the origin of `R`, from
    /// `1 + K + K(K+1)/2` normalization integrals evaluated in parallel.
    pub fn moments(&self, method: Method) -> Result<RMoments> {
        let k = self.k();
        let mut shifts: Vec<Vec<usize>> = vec![vec![]];
        shifts.extend((0..k).map(|i| vec![i]));
        for i in 0..k {
            for j in i..k {
                shifts.push(vec![i, j]);
            }
        }
        let norms: Vec<Normalization> = shifts
            .par_iter()
            .map(|b| self.shifted(b).log_normalization(method))
            .collect::<Result<_>>()?;
        let l0 = norms[0].log_j;
        let a0 = self.alpha0;
        let al = &self.alphas;
        let mean: Vec<f64> = (0..k)
            .map(|i| (norms[1 + i].log_j - l0).exp() * al[i] / a0)
            .collect();
        let mut second = vec![vec![0.0; k]; k];
        let mut idx = 1 + k;
        for i in 0..k {
            for j in i..k {
                let ratio = (norms[idx].log_j - l0).exp();
                let bump = if i == j { 1.0 } else { 0.0 };
                let v = ratio * al[i] * (al[j] + bump) / (a0 * (a0 + 1.0));
                second[i][j] = v;
                second[j][i] = v;
                idx += 1;
            }
        }
        let max_residual = norms
            .iter()
            .filter_map(|n| n.residual)
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
        Ok(RMoments {
            method,
            mean,
            second_origin: second,
            log_j: norms.iter().map(|n| n.log_j).collect(),
            max_residual,
        })
    }
}

/// Smallest count per outcome compatible with truncation level `a` over `n`
/// runs, `N a - 2 sqrt(N a (1 - a))`, floored at zero.
pub fn min_plausible_count(n: u64, a: f64) -> f64 {
    let na = n as f64 * a;
    (na - 2.0 * (na * (1.0 - a)).sqrt()).max(0.0)
}
