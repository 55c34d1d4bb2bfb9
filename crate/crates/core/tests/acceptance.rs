//! Acceptance checks. Every test prints a single `PASS`/`FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives the
//! summary.

use std::time::{Duration, Instant};

use photostat_core::detector_model::{poisson_closure_check, DetectorParams};
use photostat_core::distributions::{dirichlet_moments, DirichletParams};
use photostat_core::nuisance::{edgeworth_nodes, EdgeworthOrder, ImpreciseParam};
use photostat_core::pulsed_inference::{
    effective_dark_rate, equal_two_detector_posterior, expected_posterior_sigma, k_outcome_posterior,
    single_detector_posterior, two_detector_click_probs, unequal_two_detector_posterior, CountRecord,
    Setup,
};
use photostat_core::quadrature::{composite_simpson, simplex_grid_integral};
use photostat_core::specfun::{reg_gamma_p, reg_gamma_q, reg_inc_beta};
use photostat_core::truncated_dirichlet::{min_plausible_count, Method, TruncatedDirichlet};
use photostat_core::cw_inference::povm_scale_factors;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id} [{name}]: {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

fn table_params() -> DetectorParams {
    DetectorParams::from_alpha_beta(0.1, 0.2).unwrap()
}

fn table_grid(setups: [Setup; 2]) -> (Vec<[f64; 2]>, Duration) {
    let t = Instant::now();
    let d = table_params();
    let rows = [0.0, 0.5, 1.0]
        .iter()
        .map(|&p| {
            [
                expected_posterior_sigma(p, 100, &d, setups[0]).unwrap(),
                expected_posterior_sigma(p, 100, &d, setups[1]).unwrap(),
            ]
        })
        .collect();
    (rows, t.elapsed())
}

fn grid_mismatches(got: &[[f64; 2]], want: &[[f64; 2]], tol: f64) -> Vec<String> {
    let mut bad = vec![];
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        for j in 0..2 {
            if (g[j] - w[j]).abs() > tol {
                bad.push(format!("row {i} col {j}: {:.4} vs {:.3}", g[j], w[j]));
            }
        }
    }
    bad
}

#[test]
fn criterion_1_table1() {
    let want = [[0.033, 0.044], [0.070, 0.088], [0.04, 0.044]];
    let (got, took) = table_grid([Setup::OneDetector, Setup::TwoDetector]);
    let bad = grid_mismatches(&got, &want, 0.002);
    let pass = bad.is_empty() && took < Duration::from_secs(60);
    report(
        1,
        "table 1",
        pass,
        &format!("got {got:.4?} in {took:.2?}; off by more than 0.002: {bad:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_table2() {
    let want = [[0.033, 0.017], [0.070, 0.052], [0.04, 0.017]];
    let (got, took) = table_grid([Setup::OneDetector, Setup::TwoDetectorConstrained]);
    let bad = grid_mismatches(&got, &want, 0.002);
    let ratio = got[1][1] / got[1][0];
    let pass = bad.is_empty() && (0.6..=0.8).contains(&ratio);
    report(
        2,
        "table 2",
        pass,
        &format!("got {got:.4?}, ratio at p=0.5 {ratio:.3}; off by more than 0.002: {bad:?}; {took:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_saddle_taylor_k2() {
    let t = Instant::now();
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for a1 in 1..50 {
        let td = TruncatedDirichlet::new(vec![a1 as f64, 50.0 - a1 as f64], 0.1).unwrap();
        let exact = td.exact_log_normalization_k2().unwrap().exp();
        let approx = td.normalization(Method::SaddleTaylor).unwrap();
        max_abs = max_abs.max((approx - exact).abs());
        max_rel = max_rel.max(((approx - exact) / exact).abs());
    }
    let took = t.elapsed();
    let pass = max_abs <= 5e-5 && max_rel <= 5e-5 && took < Duration::from_secs(30);
    report(
        3,
        "saddle-taylor J, alpha0 = 50",
        pass,
        &format!("max abs {max_abs:.4e}, max rel {max_rel:.4e}, {took:.2?}"),
    );
    assert!(pass);
}

/// Worst `|E_bp[R_i] - E_quad[R_i]| / sd_quad(R_i)` over all count vectors
/// with total `n` whose entries clear the plausibility floor.
fn worst_first_moment_gap(n: u64, a: f64) -> (f64, [u64; 3], usize) {
    let floor = min_plausible_count(n, a);
    let mut gs = vec![];
    for g1 in 0..=n {
        for g2 in 0..=n - g1 {
            let g = [g1, g2, n - g1 - g2];
            if g.iter().all(|&x| x as f64 >= floor) {
                gs.push(g);
            }
        }
    }
    let worst = gs
        .par_iter()
        .map(|g| {
            let td = TruncatedDirichlet::new(g.iter().map(|&x| x as f64 + 1.0).collect(), a).unwrap();
            let q = td.moments(Method::SaddleQuad).unwrap();
            let b = td.moments(Method::BetaProduct).unwrap();
            let gap = (0..3)
                .map(|i| {
                    let sd = (q.second_origin[i][i] - q.mean[i] * q.mean[i]).sqrt();
                    (q.mean[i] - b.mean[i]).abs() / sd
                })
                .fold(0.0, f64::max);
            (gap, *g)
        })
        .reduce(|| (0.0, [0; 3]), |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x });
    (worst.0, worst.1, gs.len())
}

#[test]
fn criterion_4_beta_product_quality() {
    let t = Instant::now();
    let td = TruncatedDirichlet::new(vec![10.0, 10.0, 50.0], 0.1).unwrap();
    let q = td.moments(Method::SaddleQuad).unwrap();
    let b = td.moments(Method::BetaProduct).unwrap();
    let mut second_gap = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let r = q.second_origin[i][j];
            second_gap = second_gap.max(((b.second_origin[i][j] - r) / r).abs());
        }
    }
    let mut lines = vec![format!("a=0.1 second-origin max rel gap {second_gap:.4}")];
    let mut pass = second_gap < 0.05;
    for n in [30u64, 60, 100] {
        let (gap, at, count) = worst_first_moment_gap(n, 0.05);
        lines.push(format!("a=0.05 N={n}: worst {gap:.4} sd at g={at:?} over {count} vectors"));
        pass &= gap <= 0.1;
    }
    let took = t.elapsed();
    pass &= took < Duration::from_secs(120);
    report(4, "beta-product quality", pass, &format!("{}; {took:.2?}", lines.join("; ")));
    assert!(pass);
}

fn time_method(td: &TruncatedDirichlet, m: Method, reps: u32) -> Duration {
    td.moments(m).unwrap();
    let t = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(td.moments(m).unwrap());
    }
    t.elapsed() / reps
}

#[test]
fn criterion_5_method_ordering() {
    let td = TruncatedDirichlet::new(vec![10.0, 10.0, 50.0], 0.1).unwrap();
    let tb = time_method(&td, Method::BetaProduct, 200);
    let tt = time_method(&td, Method::SaddleTaylor, 200);
    let tq = time_method(&td, Method::SaddleQuad, 10);
    let speed_ok = tb < tt && tt < tq;

    let methods = [Method::SaddleQuad, Method::SaddleTaylor, Method::BetaProduct];
    let mut err = [0.0f64; 3];
    for a1 in 1..50 {
        let td = TruncatedDirichlet::new(vec![a1 as f64, 50.0 - a1 as f64], 0.1).unwrap();
        let exact = td.exact_log_normalization_k2().unwrap().exp();
        for (e, m) in err.iter_mut().zip(methods) {
            *e = e.max((td.normalization(m).unwrap() - exact).abs());
        }
    }
    let accuracy_ok = err[0] < err[1] && err[1] < err[2];
    report(
        5,
        "method ordering",
        speed_ok && accuracy_ok,
        &format!(
            "time bp {tb:.2?} < taylor {tt:.2?} < quad {tq:.2?}: {speed_ok}; \
             K=2 max abs J error quad {:.3e} < taylor {:.3e} < bp {:.3e}: {accuracy_ok}",
            err[0], err[1], err[2]
        ),
    );
    assert!(speed_ok && accuracy_ok);
}

const SIMPSON_PANELS: usize = 20_000;

/// Mean and second moment of `p` under the unnormalized log density `log_l`
/// on `[0, 1]`, by composite Simpson.
fn simpson_moments(log_l: impl Fn(f64) -> f64) -> (f64, f64) {
    let shift = (0..=2000).map(|i| log_l(i as f64 / 2000.0)).fold(f64::NEG_INFINITY, f64::max);
    let dens = |p: f64| (log_l(p) - shift).exp();
    let z = composite_simpson(dens, 0.0, 1.0, SIMPSON_PANELS);
    let m1 = composite_simpson(|p| p * dens(p), 0.0, 1.0, SIMPSON_PANELS) / z;
    let m2 = composite_simpson(|p| p * p * dens(p), 0.0, 1.0, SIMPSON_PANELS) / z;
    (m1, m2)
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn oracle_single(rng: &mut ChaCha8Rng) -> f64 {
    let d = DetectorParams::new(rng.random_range(0.0..0.2), rng.random_range(0.5..1.0)).unwrap();
    let n = rng.random_range(1..=200u64);
    let g = rng.random_range(0..=n);
    let pm = single_detector_posterior(g, n, &d).unwrap();
    let (m1, m2) = simpson_moments(|p| {
        let q = d.alpha() + d.gamma() * p;
        xlny(g as f64, q) + xlny((n - g) as f64, 1.0 - q)
    });
    rel(pm.mu(), m1).max(rel(pm.second_origin[0][0], m2))
}

fn oracle_equal(rng: &mut ChaCha8Rng) -> f64 {
    let a = rng.random_range(0.0..0.1);
    let g1 = rng.random_range(0..=150u64);
    let g2 = rng.random_range(if g1 == 0 { 1 } else { 0 }..=150u64);
    let pm = equal_two_detector_posterior(g1, g2, a).unwrap();
    let w = 1.0 - 2.0 * a;
    let (m1, m2) = simpson_moments(|p| xlny(g1 as f64, a + w * p) + xlny(g2 as f64, 1.0 - a - w * p));
    rel(pm.mu(), m1).max(rel(pm.second_origin[0][0], m2))
}

fn oracle_unequal(rng: &mut ChaCha8Rng) -> f64 {
    let d1 = DetectorParams::new(rng.random_range(0.0..0.2), rng.random_range(0.4..1.0)).unwrap();
    let d2 = DetectorParams::new(rng.random_range(0.0..0.2), rng.random_range(0.4..1.0)).unwrap();
    let g = [rng.random_range(1..=100u64), rng.random_range(0..=100u64), rng.random_range(0..=100u64)];
    let post = unequal_two_detector_posterior(g[0], g[1], Some(g[2]), &d1, &d2).unwrap();
    let (m1, m2) = simpson_moments(|p| {
        let c = two_detector_click_probs(p, &d1, &d2).unwrap();
        xlny(g[0] as f64, c.q10) + xlny(g[1] as f64, c.q01) + xlny(g[2] as f64, c.q00 + c.q11)
    });
    rel(post.moments.mu(), m1).max(rel(post.moments.second_origin[0][0], m2))
}

/// Mean and covariance of `p` on the K=3 simplex with density proportional
/// to `Π (a + (1 - 3a) p_i)^{g_i}`, on a Simpson grid.
fn grid_k3(g: [u64; 3], a: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let w = 1.0 - 3.0 * a;
    let log_l = |p1: f64, p2: f64| {
        let p = [p1, p2, (1.0 - p1 - p2).max(0.0)];
        (0..3).map(|i| xlny(g[i] as f64, a + w * p[i])).sum::<f64>()
    };
    let mut shift = f64::NEG_INFINITY;
    for i in 0..=200 {
        for j in 0..=200 - i {
            shift = shift.max(log_l(i as f64 / 200.0, j as f64 / 200.0));
        }
    }
    let step = 1.0 / 400.0;
    let moment = |f: &dyn Fn([f64; 3]) -> f64| {
        simplex_grid_integral(
            |p1, p2| {
                let p = [p1, p2, (1.0 - p1 - p2).max(0.0)];
                f(p) * (log_l(p1, p2) - shift).exp()
            },
            step,
        )
    };
    let z = moment(&|_| 1.0);
    let mut mean = [0.0; 3];
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        mean[i] = moment(&|p| p[i]) / z;
    }
    for i in 0..3 {
        for j in i..3 {
            let m = moment(&|p| p[i] * p[j]) / z;
            cov[i][j] = m - mean[i] * mean[j];
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

fn oracle_k3(rng: &mut ChaCha8Rng) -> f64 {
    let a = rng.random_range(0.0..0.1);
    let g = [rng.random_range(0..=30u64), rng.random_range(0..=30u64), rng.random_range(1..=30u64)];
    let rec = CountRecord::new(g.to_vec(), None).unwrap();
    let post = k_outcome_posterior(&rec, a, Method::SaddleQuad).unwrap();
    let (mean, cov) = grid_k3(g, a);
    let mut worst = 0.0f64;
    for i in 0..3 {
        worst = worst.max(rel(post.moments.mean[i], mean[i]));
        for j in 0..3 {
            let scale = (cov[i][i] * cov[j][j]).sqrt();
            worst = worst.max((post.moments.cov[i][j] - cov[i][j]).abs() / scale);
        }
    }
    worst
}

#[test]
fn criterion_6_oracle_equivalence() {
    const CASES: u64 = 25;
    let suites: [(&str, fn(&mut ChaCha8Rng) -> f64); 4] = [
        ("single", oracle_single),
        ("equal", oracle_equal),
        ("unequal", oracle_unequal),
        ("k3", oracle_k3),
    ];
    let mut pass = true;
    let mut lines = vec![];
    for (s, (name, case)) in suites.iter().enumerate() {
        let worst = (0..CASES)
            .into_par_iter()
            .map(|c| case(&mut ChaCha8Rng::seed_from_u64(1000 * s as u64 + c)))
            .reduce(|| 0.0, f64::max);
        pass &= worst <= 1e-3;
        lines.push(format!("{name} worst rel {worst:.2e}"));
    }
    report(6, "oracle equivalence, 25 cases each", pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_7_invariant_suites() {
    let mut failures: Vec<String> = vec![];
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    for _ in 0..2000 {
        let alpha = 10f64.powf(rng.random_range(-2.0..3.0));
        let x = alpha * rng.random_range(0.0..3.0);
        let s = reg_gamma_p(alpha, x).unwrap() + reg_gamma_q(alpha, x).unwrap();
        if (s - 1.0).abs() > 1e-12 {
            failures.push(format!("P+Q at ({alpha}, {x}) = {s}"));
        }
    }
    for _ in 0..2000 {
        let a = 10f64.powf(rng.random_range(-1.0..2.5));
        let b = 10f64.powf(rng.random_range(-1.0..2.5));
        let x = rng.random_range(0.0..1.0);
        let s = reg_inc_beta(x, a, b).unwrap() + reg_inc_beta(1.0 - x, b, a).unwrap();
        if (s - 1.0).abs() > 1e-12 {
            failures.push(format!("reflection at ({x}, {a}, {b}) = {s}"));
        }
    }
    for (alpha, eta, nu) in [(0.1, 0.7, 3.0), (0.01, 0.5, 10.0), (0.3, 0.95, 0.5), (0.0, 0.6, 20.0)] {
        let dev = poisson_closure_check(nu, &DetectorParams::new(alpha, eta).unwrap(), 60).unwrap();
        if dev > 1e-10 {
            failures.push(format!("Poisson closure at ({alpha}, {eta}, {nu}): {dev:e}"));
        }
    }
    for _ in 0..200 {
        let (mu, sd) = (rng.random_range(-5.0..5.0), rng.random_range(0.01..3.0));
        let ip = ImpreciseParam::new(mu, sd, rng.random_range(-2.0..2.0)).unwrap();
        let (nodes, weights) = edgeworth_nodes(&ip, EdgeworthOrder::Three);
        let gauss = [1.0, mu, mu * mu + sd * sd, mu.powi(3) + 3.0 * mu * sd * sd];
        for (k, want) in gauss.iter().enumerate() {
            let got: f64 = nodes.iter().zip(&weights).map(|(y, w)| w * y.powi(k as i32)).sum();
            if (got - want).abs() > 1e-12 * (1.0 + want.abs()) {
                failures.push(format!("Edgeworth m=3 degree {k} at ({mu}, {sd}): {got} vs {want}"));
            }
        }
    }
    for k in 1..=10 {
        for eps in [1e-4, 1e-8, 1e-12] {
            let (p1, p2) = povm_scale_factors(1.0 - eps, 1.0, k).unwrap();
            if (p1 - 1.0).abs() > 10.0 * eps || (p2 - 1.0).abs() > 10.0 * eps {
                failures.push(format!("phi continuity K={k}, eps={eps}: ({p1}, {p2})"));
            }
        }
    }
    let d = table_params();
    for n in [1u64, 10, 100, 1000] {
        for g in [0, n / 3, n] {
            let mu = single_detector_posterior(g, n, &d).unwrap().mu();
            let a = effective_dark_rate(&d, &d, 2).unwrap();
            let mu2 = equal_two_detector_posterior(g, n - g, a).unwrap().mu();
            if !(mu > 0.0 && mu < 1.0 && mu2 > 0.0 && mu2 < 1.0) {
                failures.push(format!("mean outside (0,1) at g={g}, N={n}: {mu}, {mu2}"));
            }
        }
    }
    for g in [[0u64, 0, 40], [40, 0, 0], [0, 5, 0], [3, 7, 11]] {
        let rec = CountRecord::new(g.to_vec(), None).unwrap();
        for m in [Method::SaddleQuad, Method::SaddleTaylor, Method::BetaProduct] {
            let post = k_outcome_posterior(&rec, 0.05, m).unwrap();
            if post.moments.mean.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                failures.push(format!("K=3 mean outside (0,1) for {g:?} with {m}: {:?}", post.moments.mean));
            }
        }
    }
    for _ in 0..200 {
        let k = rng.random_range(2..8usize);
        let alphas: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..50.0)).collect();
        let (_, cov) = dirichlet_moments(&DirichletParams::new(alphas.clone()).unwrap());
        let scale = cov[0][0].abs();
        for row in &cov {
            if row.iter().sum::<f64>().abs() > 1e-14 * scale.max(1.0) {
                failures.push(format!("null vector fails for {alphas:?}"));
            }
        }
        for _ in 0..20 {
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q: f64 = (0..k).map(|i| (0..k).map(|j| x[i] * cov[i][j] * x[j]).sum::<f64>()).sum();
            if q < -1e-14 {
                failures.push(format!("covariance not PSD for {alphas:?}: {q}"));
            }
        }
    }
    let pass = failures.is_empty();
    report(7, "invariant suites", pass, &format!("{} failures {:?}", failures.len(), failures.iter().take(5).collect::<Vec<_>>()));
    assert!(pass);
}

/// Fraction of `g/N` where the posterior mean sits within 0.02 of 0 or 1.
fn plateau_fraction(mus: &[f64]) -> f64 {
    mus.iter().filter(|&&m| m < 0.02 || m > 0.98).count() as f64 / mus.len() as f64
}

#[test]
fn criterion_8_figure_shapes() {
    let d = table_params();
    let a = effective_dark_rate(&d, &d, 2).unwrap();
    let mut problems = vec![];
    let mut plateaus = (0.0, 0.0);
    for n in [10u64, 100, 1000, 10_000] {
        let one: Vec<f64> = (0..=n)
            .into_par_iter()
            .map(|g| single_detector_posterior(g, n, &d).unwrap().mu())
            .collect();
        let two: Vec<f64> = (0..=n)
            .into_par_iter()
            .map(|g| equal_two_detector_posterior(g, n - g, a).unwrap().mu())
            .collect();
        for (name, mus) in [("one-detector", &one), ("two-detector", &two)] {
            if mus.windows(2).any(|w| w[1] < w[0]) {
                problems.push(format!("{name} mu not monotone at N={n}"));
            }
            if mus.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
                problems.push(format!("{name} mu leaves (0,1) at N={n}"));
            }
        }
        if n == 10_000 {
            let nf = n as f64;
            let lo_edge = 0.1 - 3.0 * (0.1 / nf).sqrt();
            let hi_edge = 1.0 - 0.2 + 3.0 * (0.2 / nf).sqrt();
            for (g, &m) in one.iter().enumerate() {
                let x = g as f64 / nf;
                if (x <= lo_edge && m >= 0.02) || (x >= hi_edge && m <= 0.98) {
                    problems.push(format!("plateau bound broken at g={g}: mu={m}"));
                }
            }
            plateaus = (plateau_fraction(&one), plateau_fraction(&two));
        }
    }
    if plateaus.1 >= plateaus.0 {
        problems.push(format!("two-detector plateau {:.4} not shorter than {:.4}", plateaus.1, plateaus.0));
    }
    let pass = problems.is_empty();
    report(
        8,
        "figure shapes",
        pass,
        &format!(
            "plateau fraction at N=1e4: one-detector {:.4}, two-detector {:.4}; problems {problems:?}",
            plateaus.0, plateaus.1
        ),
    );
    assert!(pass);
}
