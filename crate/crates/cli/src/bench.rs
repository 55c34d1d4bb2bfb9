use std::time::Instant;

use photostat_core::truncated_dirichlet::{Method, RMoments, TruncatedDirichlet};
use serde::Serialize;

use crate::error::CliResult;

const METHODS: [Method; 3] = [Method::BetaProduct, Method::SaddleTaylor, Method::SaddleQuad];

#[derive(Debug, Serialize)]
pub struct MethodTiming {
    pub method: Method,
    /// Median over rounds of the mean time per call.
    pub time_ms: f64,
    pub calls_per_round: u32,
    /// Largest absolute difference from saddle-quad over the mean vector
    /// and the second-moment matrix.
    pub max_abs_diff_vs_saddle_quad: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub alphas: Vec<f64>,
    pub a: f64,
    pub rounds: usize,
    pub methods: Vec<MethodTiming>,
    pub ordering_holds: bool,
    /// Per-round ratio time(saddle-quad) / time(beta-product).
    pub quad_over_beta_ratios: Vec<f64>,
    /// (max - min) / median of those ratios.
    pub ratio_spread: f64,
}

fn max_abs_diff(x: &RMoments, y: &RMoments) -> f64 {
    let mean = x.mean.iter().zip(&y.mean).map(|(a, b)| (a - b).abs());
    let second = x
        .second_origin
        .iter()
        .flatten()
        .zip(y.second_origin.iter().flatten())
        .map(|(a, b)| (a - b).abs());
    mean.chain(second).fold(0.0, f64::max)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn bench(rounds: usize) -> CliResult<BenchReport> {
    let alphas = vec![10.0, 10.0, 50.0];
    let a = 0.1;
    let td = TruncatedDirichlet::new(alphas.clone(), a)?;
    let reference = td.moments(Method::SaddleQuad)?;
    let rounds = rounds.max(1);

    let mut per_method: Vec<(Vec<f64>, u32, f64)> = vec![];
    for m in METHODS {
        let first = td.moments(m)?;
        // enough calls for ~50 ms per round
        let t = Instant::now();
        td.moments(m)?;
        let one = t.elapsed().as_secs_f64().max(1e-7);
        let calls = ((0.05 / one) as u32).clamp(3, 100_000);
        let mut times = vec![];
        for _ in 0..rounds {
            let t = Instant::now();
            for _ in 0..calls {
                std::hint::black_box(td.moments(m)?);
            }
            times.push(t.elapsed().as_secs_f64() * 1e3 / calls as f64);
        }
        per_method.push((times, calls, max_abs_diff(&first, &reference)));
    }
    let ratios: Vec<f64> = (0..rounds).map(|r| per_method[2].0[r] / per_method[0].0[r]).collect();
    let mut sorted = ratios.clone();
    let mid = median(&mut sorted);
    let spread = (sorted[sorted.len() - 1] - sorted[0]) / mid;

    let methods: Vec<MethodTiming> = METHODS
        .iter()
        .zip(per_method)
        .map(|(&method, (mut times, calls, diff))| MethodTiming {
            method,
            time_ms: median(&mut times),
            calls_per_round: calls,
            max_abs_diff_vs_saddle_quad: diff,
        })
        .collect();
    let ordering_holds = methods[0].time_ms < methods[1].time_ms && methods[1].time_ms < methods[2].time_ms;
    Ok(BenchReport {
        alphas,
        a,
        rounds,
        methods,
        ordering_holds,
        quad_over_beta_ratios: ratios,
        ratio_spread: spread,
    })
}
