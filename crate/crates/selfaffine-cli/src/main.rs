//! Command line front end for the self-affine measure toolkit.
//!
//! Every subcommand reads one TOML configuration (`--config`), prints a
//! summary as `key=value` lines on stdout, and writes any tables or images
//! under `--out`. Exit codes are part of the interface:
//!
//! * `0` — success, or a verdict of "holds" / all checks passed
//! * `1` — a definite negative verdict (collision found, check failed)
//! * `2` — undecided within the configured depth
//! * `64` — configuration or parameter error
//! * `65` — an enumeration, state, or sampling budget was exhausted
//! * `70` — internal error (I/O, cache, arithmetic overflow)

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selfaffine::Error;

mod commands;
mod config;
mod report;

use config::RunConfig;
use report::Reporter;

#[derive(Parser)]
#[command(
    name = "selfaffine-cli",
    version,
    about = "Pseudo norms, open set condition, and certified measure brackets \
             for self-affine attractors"
)]
struct Cli {
    /// TOML configuration describing the matrix, digits, and budgets.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory that receives CSV tables and images.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (default: one per core). Results are identical for
    /// every choice.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide (exact modes) or probe (float mode) the open set condition.
    CheckOsc,
    /// Certified two-sided bracket for the pseudo Hausdorff measure.
    Measure,
    /// Pseudo norm diagnostics: annulus, exponents, operator tables.
    NormProbe,
    /// Self-similarity convolution check plus dimension estimates.
    Density,
    /// Raster images of the attractor or of the norm field.
    Render,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: Cli) -> selfaffine::Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .ok_or_else(|| Error::InvalidParameter("--config <FILE> is required".into()))?;
    let cfg = RunConfig::load(&path)?;
    let rep = Reporter::new(&cli.out, cfg.hash())?;
    rep.kv("config_hash", rep.hash());
    let code = match cli.cmd {
        Cmd::CheckOsc => commands::run_check_osc(&cfg, &rep)?,
        Cmd::Measure => commands::run_measure(&cfg, &rep)?,
        Cmd::NormProbe => commands::run_norm_probe(&cfg, &rep)?,
        Cmd::Density => commands::run_density(&cfg, &rep)?,
        Cmd::Render => commands::run_render(&cfg, &rep)?,
    };
    Ok(code as u8)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_)
        | Error::NotExpanding { .. }
        | Error::Singular { .. }
        | Error::NotSimilarity { .. }
        | Error::HorizonExceeded { .. }
        | Error::UnsupportedDimension { .. } => 64,
        Error::BudgetExceeded { .. }
        | Error::StateBudgetExceeded { .. }
        | Error::GridTooCoarse { .. } => 65,
        _ => 70,
    }
}
