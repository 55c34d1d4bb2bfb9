use photostat_core::cw_inference::{cw_posterior, CwExperiment, PovmSum};
use photostat_core::detector_model::DetectorParams;
use photostat_core::nuisance::{marginalize_posterior, ImpreciseParam, Marginalized, ParamDomain};
use photostat_core::pulsed_inference::{
    effective_dark_rate, equal_two_detector_node, k_outcome_posterior, single_detector_node,
    unequal_two_detector_posterior, CountRecord,
};
use photostat_core::truncated_dirichlet::Method;
use photostat_core::PosteriorMoments;
use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub method: String,
    #[serde(rename = "J_values_log")]
    pub j_values_log: Vec<f64>,
    pub saddle_residual: Option<f64>,
    pub localized_support: Option<[f64; 2]>,
    /// Parameter values at which the posterior was evaluated when a nuisance
    /// parameter was integrated out.
    pub nuisance_nodes: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InferResult {
    pub experiment: &'static str,
    pub counts: Vec<u64>,
    pub mean: Vec<f64>,
    pub second_origin: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
    pub std: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl InferResult {
    fn new(cfg: &RunConfig, counts: &[u64], m: PosteriorMoments, diagnostics: Diagnostics) -> Self {
        Self {
            experiment: cfg.experiment.name(),
            counts: counts.to_vec(),
            mean: m.mean,
            second_origin: m.second_origin,
            cov: m.cov,
            std: m.std,
            diagnostics,
        }
    }
}

fn diag(method: impl Into<String>, j: Vec<f64>) -> Diagnostics {
    Diagnostics {
        method: method.into(),
        j_values_log: j,
        saddle_residual: None,
        localized_support: None,
        nuisance_nodes: None,
        warnings: vec![],
    }
}

fn from_marginalized(m: Marginalized, method: &str, order: u32) -> (PosteriorMoments, Diagnostics) {
    let mut d = diag(format!("{method}+edgeworth-{order}"), m.node_log_norms);
    if m.clamped {
        d.warnings.push("an Edgeworth node fell outside the parameter range and was clamped".into());
    }
    d.nuisance_nodes = Some(m.nodes);
    (m.moments, d)
}

fn order_number(cfg: &RunConfig) -> u32 {
    match cfg.edgeworth_order {
        photostat_core::nuisance::EdgeworthOrder::Three => 3,
        photostat_core::nuisance::EdgeworthOrder::Four => 4,
    }
}

/// Effective dark rate for `k` identical detectors, unless given directly.
fn effective_rate(cfg: &RunConfig, k: usize) -> CliResult<f64> {
    if let Some(a) = cfg.effective_dark_rate {
        return Ok(a);
    }
    let first = cfg.detectors[0];
    let other = cfg.detectors.iter().copied().find(|d| *d != first).unwrap_or(first);
    Ok(effective_dark_rate(&first, &other, k)?)
}

fn check_runs(cfg: &RunConfig, counts: &[u64]) -> CliResult<()> {
    if let Some(n) = cfg.runs {
        let total: u64 = counts.iter().sum();
        if total > n {
            return Err(CliError::input(format!(
                "field `runs`: counts sum to {total}, more than runs = {n}"
            )));
        }
    }
    Ok(())
}

fn infer_one(cfg: &RunConfig, counts: &[u64]) -> CliResult<InferResult> {
    let order = order_number(cfg);
    let (moments, mut d) = match cfg.experiment {
        Experiment::Pulsed1Det => {
            let (g, n) = (counts[0], cfg.runs.expect("validated"));
            let det = cfg.detectors[0];
            match cfg.imprecise {
                None => {
                    let node = single_detector_node(g, n, &det)?;
                    let d = diag("incomplete-beta", vec![node.log_norm]);
                    (node.into_moments(), d)
                }
                Some(ip) => {
                    let ip = ImpreciseParam::new(det.alpha(), ip.sigma, ip.skew)?;
                    let domain = ParamDomain { lo: 0.0, hi: 1.0 - f64::EPSILON };
                    let eta = det.eta();
                    let m = marginalize_posterior(
                        |alpha| single_detector_node(g, n, &DetectorParams::new(alpha, eta)?),
                        &ip,
                        cfg.edgeworth_order,
                        domain,
                    )?;
                    from_marginalized(m, "incomplete-beta", order)
                }
            }
        }
        Experiment::Pulsed2Det => {
            check_runs(cfg, counts)?;
            let a = effective_rate(cfg, 2)?;
            let (g1, g2) = (counts[0], counts[1]);
            match cfg.imprecise {
                None => {
                    let node = equal_two_detector_node(g1, g2, a)?;
                    let mut d = diag("incomplete-beta", vec![node.log_norm]);
                    if g1 + g2 == 0 {
                        d.warnings.push("no single-click events: prior moments returned".into());
                    }
                    (node.into_moments(), d)
                }
                Some(ip) => {
                    let ip = ImpreciseParam::new(a, ip.sigma, ip.skew)?;
                    let domain = ParamDomain { lo: 0.0, hi: 0.5 - f64::EPSILON };
                    let m = marginalize_posterior(
                        |a| equal_two_detector_node(g1, g2, a),
                        &ip,
                        cfg.edgeworth_order,
                        domain,
                    )?;
                    from_marginalized(m, "incomplete-beta", order)
                }
            }
        }
        Experiment::Pulsed2DetUnequal => {
            check_runs(cfg, counts)?;
            let (g1, g2) = (counts[0], counts[1]);
            let g0 = cfg.runs.map(|n| n - g1 - g2);
            let post = unequal_two_detector_posterior(g1, g2, g0, &cfg.detectors[0], &cfg.detectors[1])?;
            let mut d = diag("adaptive-quadrature", vec![post.log_j]);
            d.localized_support = Some([post.support.lo, post.support.hi]);
            if g0.is_none() {
                d.warnings.push("runs not given: the no-click/double-click factor is left out".into());
            }
            (post.moments, d)
        }
        Experiment::PulsedK => {
            check_runs(cfg, counts)?;
            let k = counts.len();
            let a = effective_rate(cfg, k)?;
            let method = cfg.method.unwrap_or_else(|| Method::default_for(k));
            let rec = CountRecord::new(counts.to_vec(), cfg.runs)?;
            let post = k_outcome_posterior(&rec, a, method)?;
            let mut d = diag(method.name(), post.r_moments.log_j.clone());
            d.saddle_residual = post.r_moments.max_residual;
            if method == Method::BetaProduct && a > 0.1 {
                d.warnings.push(format!("beta-product is a rough approximation at a = {a} > 0.1"));
            }
            (post.moments, d)
        }
        Experiment::Cw => {
            let det = cfg.detectors[0];
            let povm = match (cfg.b, cfg.eigen_range) {
                (_, Some([lo, hi])) => PovmSum::EigenRange { min: lo, max: hi },
                (Some(b), None) => PovmSum::Scalar(b),
                (None, None) => PovmSum::Scalar(1.0),
            };
            let exp = CwExperiment::new(counts.to_vec(), det.alpha(), povm)?;
            let method = cfg.method.unwrap_or_else(|| Method::default_for(counts.len()));
            let post = cw_posterior(&exp, cfg.edgeworth_order, method)?;
            let label = if post.y.is_some() { format!("{}+edgeworth-{order}", method.name()) } else { "dirichlet".into() };
            let mut d = diag(label, post.node_log_norms);
            if post.y.is_some() {
                d.nuisance_nodes = Some(post.nodes);
            }
            if post.clamped {
                d.warnings.push("an Edgeworth node fell below zero and was clamped".into());
            }
            if det.eta() != 1.0 {
                d.warnings.push("eta is absorbed into the beam intensity and ignored for cw".into());
            }
            (post.moments, d)
        }
    };
    if cfg.method.is_some() && !matches!(cfg.experiment, Experiment::PulsedK | Experiment::Cw) {
        d.warnings.push("`method` only applies to pulsed-k and cw and was ignored".into());
    }
    Ok(InferResult::new(cfg, counts, moments, d))
}

/// Runs the configured inference on every count record, in order.
pub fn infer(cfg: &RunConfig) -> CliResult<Vec<InferResult>> {
    cfg.records.iter().map(|c| infer_one(cfg, c)).collect()
}
