use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

mod bench;
mod config;
mod error;
mod infer;
mod output;
mod reproduce;

use config::{parse_method, parse_order, RunConfig};
use error::{CliError, CliResult};
use reproduce::Target;

/// Posterior moments of POVM outcome probabilities from photon counts.
#[derive(Parser)]
#[command(name = "photostat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run inference on a JSON run description.
    Infer {
        /// Run description; `-` reads stdin.
        #[arg(long)]
        input: PathBuf,
        /// Result file; defaults to the `output` field, then stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// saddle-quad, saddle-taylor or beta-product.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        edgeworth_order: Option<u32>,
    },
    /// Regenerate table or figure data.
    Reproduce {
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Time the three normalization methods on the K=3 benchmark case.
    Bench {
        #[arg(long, default_value_t = 5)]
        rounds: usize,
    },
    /// Upper bound on the effective dark rate from g clicks in n runs.
    Bound {
        #[arg(long)]
        g: u64,
        #[arg(long)]
        n: u64,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("PHOTOSTAT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("PHOTOSTAT_THREADS must be a non-negative integer, got '{v}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn read_input(path: &Path) -> CliResult<(String, PathBuf)> {
    if path == Path::new("-") {
        let text = std::io::read_to_string(std::io::stdin())
            .map_err(|e| CliError::input(format!("cannot read stdin: {e}")))?;
        return Ok((text, PathBuf::from(".")));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((text, base))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Infer {
            input,
            output,
            method,
            edgeworth_order,
        } => {
            let (text, base) = read_input(&input)?;
            let mut cfg = RunConfig::from_json(&text, &base)?;
            if let Some(m) = method {
                cfg.method = Some(parse_method("--method", &m)?);
            }
            if let Some(m) = edgeworth_order {
                cfg.edgeworth_order = parse_order("--edgeworth-order", m)?;
            }
            let results = infer::infer(&cfg)?;
            for r in &results {
                for w in &r.diagnostics.warnings {
                    eprintln!("warning: {w}");
                }
            }
            let text = if cfg.from_csv {
                output::to_json(&results)
            } else {
                output::to_json(&results[0])
            };
            let dest = output.or(cfg.output);
            output::emit(&text, dest.as_deref())
        }
        Command::Reproduce { target, out_dir } => {
            let summary = reproduce::reproduce(target, &out_dir)?;
            output::emit(&output::to_json(&summary), None)
        }
        Command::Bench { rounds } => {
            let report = bench::bench(rounds)?;
            output::emit(&output::to_json(&report), None)?;
            if !report.ordering_holds {
                return Err(CliError::Core(photostat_core::Error::Numeric {
                    message: "timing order beta-product < saddle-taylor < saddle-quad did not hold".into(),
                    partial: None,
                }));
            }
            Ok(())
        }
        Command::Bound { g, n } => {
            let bound = photostat_core::nuisance::dark_rate_bound(g, n)?;
            output::emit(&output::to_json(&json!({"g": g, "n": n, "bound": bound})), None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("photostat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
