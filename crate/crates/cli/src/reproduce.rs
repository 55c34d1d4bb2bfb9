//! Regenerates the reference tables and figure data.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use photostat_core::detector_model::DetectorParams;
use photostat_core::pulsed_inference::{
    effective_dark_rate, equal_two_detector_posterior, expected_posterior_sigma, single_detector_posterior, Setup,
};
use photostat_core::truncated_dirichlet::{Method, TruncatedDirichlet};
use photostat_core::PosteriorMoments;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::write_csv;

const ALPHA: f64 = 0.1;
const BETA: f64 = 0.2;
const TABLE_RUNS: u64 = 100;
const SWEEP_RUNS: [u64; 4] = [10, 100, 1000, 10_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Table1,
    Table2,
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Figtrunc,
    All,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Fig1 => "fig1",
            Target::Fig2 => "fig2",
            Target::Fig3 => "fig3",
            Target::Fig4 => "fig4",
            Target::Figtrunc => "figtrunc",
            Target::All => "all",
        }
    }
}

fn params() -> DetectorParams {
    DetectorParams::from_alpha_beta(ALPHA, BETA).expect("fixed parameters are valid")
}

fn table(setups: [Setup; 2], labels: [&str; 2]) -> CliResult<Value> {
    let d = params();
    let ps = [0.0, 0.5, 1.0];
    let rows: Vec<Vec<f64>> = ps
        .iter()
        .map(|&p| {
            setups
                .iter()
                .map(|&s| expected_posterior_sigma(p, TABLE_RUNS, &d, s))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(json!({
        "alpha": ALPHA,
        "beta": BETA,
        "runs": TABLE_RUNS,
        "p": ps,
        "columns": labels,
        "sigma": rows,
    }))
}

/// Posterior moments for every `g` in `0..=n`, in order.
fn sweep(n: u64, two_detectors: bool) -> CliResult<Vec<PosteriorMoments>> {
    let d = params();
    let a = effective_dark_rate(&d, &d, 2)?;
    let out: Result<Vec<_>, _> = (0..=n)
        .into_par_iter()
        .map(|g| {
            if two_detectors {
                equal_two_detector_posterior(g, n - g, a)
            } else {
                single_detector_posterior(g, n, &d)
            }
        })
        .collect();
    Ok(out?)
}

fn mean_curves(dir: &Path, stem: &str, two: bool) -> CliResult<Vec<PathBuf>> {
    let mut files = vec![];
    for n in SWEEP_RUNS {
        let rows = sweep(n, two)?
            .iter()
            .enumerate()
            .map(|(g, m)| vec![g as f64 / n as f64, m.mu()])
            .collect::<Vec<_>>();
        let path = dir.join(format!("{stem}_n{n}.csv"));
        write_csv(&path, &["x", "y"], &rows)?;
        files.push(path);
    }
    Ok(files)
}

fn band(dir: &Path, stem: &str, two: bool) -> CliResult<Vec<PathBuf>> {
    let n = TABLE_RUNS;
    let rows = sweep(n, two)?
        .iter()
        .enumerate()
        .map(|(g, m)| vec![g as f64 / n as f64, m.mu(), m.mu() - m.sigma(), m.mu() + m.sigma()])
        .collect::<Vec<_>>();
    let path = dir.join(format!("{stem}.csv"));
    write_csv(&path, &["x", "y", "ylo", "yhi"], &rows)?;
    Ok(vec![path])
}

fn truncation_errors(dir: &Path) -> CliResult<(Vec<PathBuf>, Value)> {
    let rows: Vec<Vec<f64>> = (1..50)
        .into_par_iter()
        .map(|a1| {
            let td = TruncatedDirichlet::new(vec![a1 as f64, 50.0 - a1 as f64], 0.1)?;
            let exact = td.exact_log_normalization_k2()?.exp();
            let approx = td.normalization(Method::SaddleTaylor)?;
            let err = approx - exact;
            Ok(vec![a1 as f64, approx, exact, err.abs(), (err / exact).abs()])
        })
        .collect::<Result<_, photostat_core::Error>>()?;
    let max_abs = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    let max_rel = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    let path = dir.join("figtrunc.csv");
    write_csv(&path, &["x", "y", "exact", "abs_error", "rel_error"], &rows)?;
    Ok((vec![path], json!({"alpha0": 50.0, "a": 0.1, "max_abs_error": max_abs, "max_rel_error": max_rel})))
}

fn run_one(target: Target, dir: &Path) -> CliResult<Value> {
    let (files, summary) = match target {
        Target::Table1 => {
            let t = table([Setup::OneDetector, Setup::TwoDetector], ["one-detector", "two-detector"])?;
            let path = dir.join("table1.json");
            std::fs::write(&path, crate::output::to_json(&t))
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
            (vec![path], t)
        }
        Target::Table2 => {
            let t = table(
                [Setup::OneDetector, Setup::TwoDetectorConstrained],
                ["one-detector", "two-detector-constrained"],
            )?;
            let path = dir.join("table2.json");
            std::fs::write(&path, crate::output::to_json(&t))
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
            (vec![path], t)
        }
        Target::Fig1 => (mean_curves(dir, "fig1", false)?, Value::Null),
        Target::Fig2 => (band(dir, "fig2", false)?, Value::Null),
        Target::Fig3 => (mean_curves(dir, "fig3", true)?, Value::Null),
        Target::Fig4 => (band(dir, "fig4", true)?, Value::Null),
        Target::Figtrunc => truncation_errors(dir)?,
        Target::All => unreachable!("expanded by the caller"),
    };
    let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    Ok(json!({"target": target.name(), "files": files, "summary": summary}))
}

pub fn reproduce(target: Target, dir: &Path) -> CliResult<Value> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let targets = match target {
        Target::All => vec![
            Target::Table1,
            Target::Table2,
            Target::Fig1,
            Target::Fig2,
            Target::Fig3,
            Target::Fig4,
            Target::Figtrunc,
        ],
        t => vec![t],
    };
    let results = targets.into_iter().map(|t| run_one(t, dir)).collect::<CliResult<Vec<_>>>()?;
    Ok(if results.len() == 1 { results.into_iter().next().unwrap() } else { Value::Array(results) })
}
