//! One-dimensional adaptive quadrature.
//!
//! [`adaptive_quad`] is a global adaptive Gauss–Kronrod (7/15) scheme: the
//! interval with the largest error estimate is bisected until the total
//! estimate meets the tolerance. Sharply peaked likelihoods are handled by
//! [`integrate_peaked`], which works from `ln f`, subtracts the maximum and
//! localizes the bulk before integrating.
//!
//! [`composite_simpson`] and [`simplex_grid_integral`] are brute-force
//! references meant for tests.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Default relative cutoff for [`localize_support`].
pub const DEFAULT_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_depth: 40,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    abs_value: f64,
    depth: u32,
    order: usize,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.order.cmp(&self.order))
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kr = WGK[7] * fc;
    let mut ga = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kr += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            ga += WG[j / 2] * (f1 + f2);
        }
    }
    (kr * h, ((kr - ga) * h).abs(), abs * h.abs())
}

/// `∫_lo^hi f` to relative tolerance `rel_tol`.
pub fn adaptive_quad<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    adaptive_quad_with(f, lo, hi, &QuadOptions::with_rel_tol(rel_tol)).map(|r| r.value)
}

/// Adaptive quadrature with explicit options. On failure the
/// [`Error::Numeric`] carries the best estimate reached.
pub fn adaptive_quad_with<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!(
            "quadrature needs finite lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut order = 0usize;
    let (v, e, a) = kronrod15(&mut f, lo, hi);
    let mut evaluations = 15;
    let mut total = v;
    let mut total_err = e;
    let mut total_abs = a;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        lo,
        hi,
        value: v,
        error: e,
        abs_value: a,
        depth: 0,
        order,
    });
    loop {
        if !total.is_finite() {
            return Err(Error::numeric("integrand produced a non-finite value", None));
        }
        let target = opts
            .abs_tol
            .max(opts.rel_tol * total.abs())
            .max(50.0 * f64::EPSILON * total_abs);
        if total_err <= target {
            return Ok(QuadResult {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        if worst.depth >= opts.max_depth || heap.len() + 2 > opts.max_intervals {
            return Err(Error::numeric(
                format!(
                    "adaptive quadrature did not converge on [{lo}, {hi}] (error {total_err:.3e})"
                ),
                Some(total),
            ));
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1, a1) = kronrod15(&mut f, worst.lo, mid);
        let (v2, e2, a2) = kronrod15(&mut f, mid, worst.hi);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        total_abs += a1 + a2 - worst.abs_value;
        for (l, h, v, e, a) in [(worst.lo, mid, v1, e1, a1), (mid, worst.hi, v2, e2, a2)] {
            order += 1;
            heap.push(Segment {
                lo: l,
                hi: h,
                value: v,
                error: e,
                abs_value: a,
                depth: worst.depth + 1,
                order,
            });
        }
        // keep the running sums honest against drift
        if order % 256 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
            total_abs = heap.iter().map(|s| s.abs_value).sum();
        }
    }
}

/// Location and height of the maximum of `log_f`, plus the localized range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
    pub peak_x: f64,
    pub peak_log: f64,
}

const GRID: usize = 129;

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Finds the maximum of a unimodal `log_f` on `[lo, hi]` and the smallest
/// interval holding every point where `f >= cutoff * max f`.
///
/// Falls back to the full interval when no finite value is found.
pub fn locate_support<F: FnMut(f64) -> f64>(mut log_f: F, lo: f64, hi: f64, cutoff: f64) -> Support {
    let step = (hi - lo) / (GRID - 1) as f64;
    let xs: Vec<f64> = (0..GRID)
        .map(|i| if i == GRID - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| finite_or_neg_inf(log_f(x))).collect();
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(&a.0)))
        .expect("grid is non-empty");
    if ymax == f64::NEG_INFINITY || !(cutoff > 0.0 && cutoff < 1.0) {
        return Support {
            lo,
            hi,
            peak_x: xs[imax],
            peak_log: ymax,
        };
    }

    // golden-section refinement of the maximum
    let mut a = xs[imax.saturating_sub(1)];
    let mut b = xs[(imax + 1).min(GRID - 1)];
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = finite_or_neg_inf(log_f(c));
    let mut fd = finite_or_neg_inf(log_f(d));
    for _ in 0..80 {
        if (b - a) <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = finite_or_neg_inf(log_f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = finite_or_neg_inf(log_f(d));
        }
    }
    let (mut peak_x, mut peak_log) = if fc >= fd { (c, fc) } else { (d, fd) };
    if ymax > peak_log {
        peak_x = xs[imax];
        peak_log = ymax;
    }
    let level = peak_log + cutoff.ln();

    let mut bisect = |mut below: f64, mut above: f64| -> f64 {
        for _ in 0..100 {
            let mid = 0.5 * (below + above);
            if mid == below || mid == above {
                break;
            }
            if finite_or_neg_inf(log_f(mid)) >= level {
                above = mid;
            } else {
                below = mid;
            }
        }
        below
    };

    let new_lo = if ys[0] >= level {
        lo
    } else {
        let first = (0..GRID).find(|&i| ys[i] >= level && xs[i] <= peak_x);
        let inner = first.map_or(peak_x, |i| xs[i]);
        let outer = xs.iter().rev().copied().find(|&x| x < inner).unwrap_or(lo);
        bisect(outer, inner)
    };
    let new_hi = if ys[GRID - 1] >= level {
        hi
    } else {
        let last = (0..GRID).rev().find(|&i| ys[i] >= level && xs[i] >= peak_x);
        let inner = last.map_or(peak_x, |i| xs[i]);
        let outer = xs.iter().copied().find(|&x| x > inner).unwrap_or(hi);
        bisect(outer, inner)
    };
    Support {
        lo: new_lo,
        hi: new_hi,
        peak_x,
        peak_log,
    }
}

/// `[lo', hi'] ⊆ [lo, hi]` covering all points with `f >= cutoff * max f`.
pub fn localize_support<F: FnMut(f64) -> f64>(log_f: F, lo: f64, hi: f64, cutoff: f64) -> (f64, f64) {
    let s = locate_support(log_f, lo, hi, cutoff);
    (s.lo, s.hi)
}

/// Log of an integral evaluated by [`integrate_peaked`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakedIntegral {
    pub log_value: f64,
    pub support: Support,
}

/// Integrates `exp(log_fs[k])` for several integrands sharing one support.
///
/// The support and scale are taken from `log_fs[0]`; the core and the two
/// flanks are integrated separately so no mass is dropped.
pub fn integrate_peaked_many(
    log_fs: &[&dyn Fn(f64) -> f64],
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<Vec<PeakedIntegral>> {
    let support = locate_support(log_fs[0], lo, hi, DEFAULT_CUTOFF);
    if support.peak_log == f64::NEG_INFINITY {
        return Err(Error::numeric("integrand vanishes everywhere on the interval", None));
    }
    let shift = support.peak_log;
    let mut out = Vec::with_capacity(log_fs.len());
    for log_f in log_fs {
        let g = |x: f64| (log_f(x) - shift).exp();
        let core = if support.hi > support.lo {
            adaptive_quad_with(g, support.lo, support.hi, &QuadOptions::with_rel_tol(rel_tol))?.value
        } else {
            0.0
        };
        let flank_opts = QuadOptions {
            rel_tol,
            abs_tol: 0.1 * rel_tol * core.abs(),
            ..QuadOptions::default()
        };
        let mut total = core;
        if support.lo > lo {
            total += adaptive_quad_with(g, lo, support.lo, &flank_opts)?.value;
        }
        if support.hi < hi {
            total += adaptive_quad_with(g, support.hi, hi, &flank_opts)?.value;
        }
        out.push(PeakedIntegral {
            log_value: shift + total.ln(),
            support,
        });
    }
    Ok(out)
}

/// `ln ∫_lo^hi exp(log_f)` for sharply peaked integrands.
pub fn integrate_peaked<F: Fn(f64) -> f64>(log_f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<PeakedIntegral> {
    Ok(integrate_peaked_many(&[&log_f], lo, hi, rel_tol)?[0])
}

/// Composite Simpson rule with `panels` (rounded up to even) panels.
pub fn composite_simpson<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + h * i as f64);
    }
    s * h / 3.0
}

/// `∫∫ f(p1, p2)` over the triangle `p1, p2 >= 0, p1 + p2 <= 1`, as iterated
/// composite Simpson sums with grid step `step` in both directions.
pub fn simplex_grid_integral<F: Fn(f64, f64) -> f64>(f: F, step: f64) -> f64 {
    let outer = ((1.0 / step).round() as usize).max(2);
    composite_simpson(
        |p1| {
            let width = 1.0 - p1;
            if width <= 0.0 {
                return 0.0;
            }
            let inner = ((width / step).ceil() as usize).max(2);
            composite_simpson(|p2| f(p1, p2), 0.0, width, inner)
        },
        0.0,
        1.0,
        outer,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::log_beta;

    #[test]
    fn polynomial_examples() {
        let v = adaptive_quad(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        // exact on polynomials of the Kronrod degree
        let v = adaptive_quad(|x| x.powi(21) - 3.0 * x.powi(7), -1.0, 2.0, 1e-13).unwrap();
        let want = (2f64.powi(22) - 1.0) / 22.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert!((v - want).abs() <= 1e-13 * want.abs());
    }

    #[test]
    fn beta_integrand() {
        let (g, n) = (30.0, 100.0);
        let v = adaptive_quad(|x: f64| x.powf(g) * (1.0 - x).powf(n - g), 0.0, 1.0, 1e-12).unwrap();
        let want = log_beta(g + 1.0, n - g + 1.0).unwrap().exp();
        assert!((v - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn reports_partial_on_failure() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            max_depth: 3,
            ..QuadOptions::default()
        };
        match adaptive_quad_with(|x: f64| x.abs().sqrt(), -1.0, 1.0, &opts) {
            Err(Error::Numeric { partial: Some(p), .. }) => assert!((p - 4.0 / 3.0).abs() < 1e-2),
            other => panic!("expected failure, got {other:?}"),
        }
        assert!(adaptive_quad(|x| x, 1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn localize_flat_keeps_everything() {
        assert_eq!(localize_support(|_| 0.0, 0.0, 1.0, 1e-6), (0.0, 1.0));
    }

    #[test]
    fn localize_gaussian_level_set() {
        let w = (1e6f64.ln() / 1e4).sqrt();
        let (lo, hi) = localize_support(|p| -1e4 * (p - 0.3) * (p - 0.3), 0.0, 1.0, 1e-6);
        assert!(lo <= 0.3 - w && hi >= 0.3 + w, "({lo}, {hi})");
        assert!(lo >= 0.3 - 2.0 * w && hi <= 0.3 + 2.0 * w, "({lo}, {hi})");
    }

    #[test]
    fn localize_narrow_posterior() {
        let lf = |p: f64| 990.0 * p.ln() + 10.0 * (-p).ln_1p();
        let (lo, hi) = localize_support(lf, 0.0, 1.0, 1e-6);
        assert!(hi - lo < 0.1);
        assert!(lo < 0.99 && hi > 0.99);
    }

    #[test]
    fn peaked_matches_closed_form() {
        let (g, n) = (990.0, 1000.0);
        let lf = |p: f64| g * p.ln() + (n - g) * (-p).ln_1p();
        let r = integrate_peaked(lf, 0.0, 1.0, 1e-11).unwrap();
        let want = log_beta(g + 1.0, n - g + 1.0).unwrap();
        assert!((r.log_value - want).abs() < 1e-10);
    }

    #[test]
    fn simpson_and_simplex_oracles() {
        let v = composite_simpson(|x| x.powi(3), 0.0, 2.0, 2);
        assert!((v - 4.0).abs() < 1e-14);
        // area of the simplex, and ∫∫ p1 = 1/6
        assert!((simplex_grid_integral(|_, _| 1.0, 1e-2) - 0.5).abs() < 1e-12);
        assert!((simplex_grid_integral(|p1, _| p1, 1e-2) - 1.0 / 6.0).abs() < 1e-12);
    }
}
