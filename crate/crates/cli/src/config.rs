use std::path::{Path, PathBuf};

use photostat_core::detector_model::DetectorParams;
use photostat_core::nuisance::EdgeworthOrder;
use photostat_core::truncated_dirichlet::Method;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Experiment {
    #[serde(rename = "pulsed-1det")]
    Pulsed1Det,
    #[serde(rename = "pulsed-2det")]
    Pulsed2Det,
    #[serde(rename = "pulsed-2det-unequal")]
    Pulsed2DetUnequal,
    #[serde(rename = "pulsed-k")]
    PulsedK,
    #[serde(rename = "cw")]
    Cw,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Pulsed1Det => "pulsed-1det",
            Experiment::Pulsed2Det => "pulsed-2det",
            Experiment::Pulsed2DetUnequal => "pulsed-2det-unequal",
            Experiment::PulsedK => "pulsed-k",
            Experiment::Cw => "cw",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorEntry {
    pub alpha: f64,
    #[serde(default = "unit")]
    pub eta: f64,
}

fn unit() -> f64 {
    1.0
}

/// Spread of the (effective) dark rate when it is only known approximately.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpreciseEntry {
    pub sigma: f64,
    #[serde(default)]
    pub skew: f64,
}

/// The input document as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub detectors: Vec<DetectorEntry>,
    pub counts: Option<Vec<u64>>,
    pub counts_csv: Option<PathBuf>,
    pub runs: Option<u64>,
    pub method: Option<String>,
    pub edgeworth_order: Option<u32>,
    pub b: Option<f64>,
    pub eigen_range: Option<[f64; 2]>,
    pub effective_dark_rate: Option<f64>,
    pub imprecise: Option<ImpreciseEntry>,
    pub output: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub detectors: Vec<DetectorParams>,
    /// One count vector per POVM setting.
    pub records: Vec<Vec<u64>>,
    /// True when counts came from CSV; the result is then a list.
    pub from_csv: bool,
    pub runs: Option<u64>,
    pub method: Option<Method>,
    pub edgeworth_order: EdgeworthOrder,
    pub b: Option<f64>,
    pub eigen_range: Option<[f64; 2]>,
    pub effective_dark_rate: Option<f64>,
    pub imprecise: Option<ImpreciseEntry>,
    pub output: Option<PathBuf>,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("field `{field}`: {msg}"))
}

pub fn parse_method(field: &str, s: &str) -> CliResult<Method> {
    s.parse::<Method>().map_err(|e| match e {
        photostat_core::Error::Domain(m) => field_err(field, m),
        other => field_err(field, other),
    })
}

pub fn parse_order(field: &str, m: u32) -> CliResult<EdgeworthOrder> {
    EdgeworthOrder::try_from(m).map_err(|_| field_err(field, format!("must be 3 or 4, got {m}")))
}

/// Reads count rows from CSV, one row per POVM setting. Lines starting with
/// `#` are skipped; a non-numeric first row is taken as a header.
pub fn read_counts_csv(path: &Path) -> CliResult<Vec<Vec<u64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| field_err("counts_csv", format!("cannot read {}: {e}", path.display())))?;
    let mut rows = vec![];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| field_err("counts_csv", e))?;
        let parsed: Result<Vec<u64>, _> = rec.iter().map(str::parse::<u64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(field_err("counts_csv", format!("row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(field_err("counts_csv", format!("{} holds no count rows", path.display())));
    }
    Ok(rows)
}

impl RunConfig {
    /// Parses and validates a JSON document. Relative CSV paths are resolved
    /// against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::input(e.into_inner().to_string())
            } else {
                field_err(&path, e.into_inner())
            }
        })?;
        Self::from_raw(raw, base_dir)
    }

    pub fn from_raw(raw: RawConfig, base_dir: &Path) -> CliResult<Self> {
        let (records, from_csv) = match (raw.counts, raw.counts_csv) {
            (Some(_), Some(_)) => {
                return Err(CliError::input("fields `counts` and `counts_csv` are mutually exclusive"))
            }
            (Some(c), None) => (vec![c], false),
            (None, Some(p)) => (read_counts_csv(&base_dir.join(p))?, true),
            (None, None) => return Err(CliError::input("missing field `counts` (or `counts_csv`)")),
        };
        let detectors = raw
            .detectors
            .iter()
            .enumerate()
            .map(|(i, d)| DetectorParams::new(d.alpha, d.eta).map_err(|e| field_err(&format!("detectors[{i}]"), e)))
            .collect::<CliResult<Vec<_>>>()?;
        let method = raw.method.as_deref().map(|m| parse_method("method", m)).transpose()?;
        let edgeworth_order = parse_order("edgeworth_order", raw.edgeworth_order.unwrap_or(4))?;
        if let Some(b) = raw.b {
            if !(b.is_finite() && b > 0.0) {
                return Err(field_err("b", format!("must be positive, got {b}")));
            }
        }
        if raw.b.is_some() && raw.eigen_range.is_some() {
            return Err(CliError::input("fields `b` and `eigen_range` are mutually exclusive"));
        }
        if let Some(ip) = raw.imprecise {
            if !(ip.sigma.is_finite() && ip.sigma > 0.0) {
                return Err(field_err("imprecise.sigma", format!("must be positive, got {}", ip.sigma)));
            }
        }
        let cfg = RunConfig {
            experiment: raw.experiment,
            detectors,
            records,
            from_csv,
            runs: raw.runs,
            method,
            edgeworth_order,
            b: raw.b,
            eigen_range: raw.eigen_range,
            effective_dark_rate: raw.effective_dark_rate,
            imprecise: raw.imprecise,
            output: raw.output,
        };
        cfg.check_shape()?;
        Ok(cfg)
    }

    fn check_shape(&self) -> CliResult<()> {
        let nd = self.detectors.len();
        let need_detectors = |lo: usize, hi: usize| {
            if nd < lo || nd > hi {
                Err(field_err(
                    "detectors",
                    format!("{} expects {lo}..={hi} detectors, got {nd}", self.experiment.name()),
                ))
            } else {
                Ok(())
            }
        };
        let counts_len = |k: usize| -> CliResult<()> {
            for (i, r) in self.records.iter().enumerate() {
                if r.len() != k {
                    return Err(field_err(
                        "counts",
                        format!("{} expects {k} counts, row {i} has {}", self.experiment.name(), r.len()),
                    ));
                }
            }
            Ok(())
        };
        match self.experiment {
            Experiment::Pulsed1Det => {
                need_detectors(1, 1)?;
                counts_len(1)?;
                if self.runs.is_none() {
                    return Err(field_err("runs", "required for pulsed-1det"));
                }
            }
            Experiment::Pulsed2Det => {
                if self.effective_dark_rate.is_none() {
                    need_detectors(1, 2)?;
                }
                counts_len(2)?;
            }
            Experiment::Pulsed2DetUnequal => {
                need_detectors(2, 2)?;
                counts_len(2)?;
            }
            Experiment::PulsedK => {
                if self.effective_dark_rate.is_none() {
                    need_detectors(1, usize::MAX)?;
                }
                if self.records.iter().any(|r| r.len() < 2) {
                    return Err(field_err("counts", "pulsed-k needs at least two outcomes"));
                }
            }
            Experiment::Cw => {
                need_detectors(1, 1)?;
                if self.records.iter().any(|r| r.len() < 2) {
                    return Err(field_err("counts", "cw needs at least two outcomes"));
                }
            }
        }
        if self.imprecise.is_some() && !matches!(self.experiment, Experiment::Pulsed1Det | Experiment::Pulsed2Det) {
            return Err(field_err("imprecise", "only supported for pulsed-1det and pulsed-2det"));
        }
        Ok(())
    }
}
