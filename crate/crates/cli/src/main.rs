//! `mmentropy`: sampling, distances, quantization, bounds and empirical
//! covers for stable Lévy paths, with reproducible run manifests.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 a property
//! suite failed, 3 I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

#[derive(Parser)]
#[command(name = "mmentropy", version, about = "mm-entropy experiments for stable Lévy paths")]
struct Cli {
    /// Flat TOML experiment file (`schema_version = 1`).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Comma-separated scales; overrides the config.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    eps: Option<Vec<f64>>,

    /// Measure budget δ; overrides the config.
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample paths split at every scale into `paths.jsonl`.
    Sample,
    /// J-distance bracket and certificate between two path dumps.
    Distance {
        f: PathBuf,
        g: PathBuf,
        #[arg(long, default_value_t = mmentropy::skorokhod::DEFAULT_TOL)]
        tol: f64,
    },
    /// Quantize paths (sampled, or read from a JSONL file) and certify them.
    Quantize {
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
    /// Upper and lower log-cardinality bounds per scale.
    Netbounds,
    /// Greedy empirical covers with bootstrap spread.
    Cover,
    /// Cover growth, scaling fit and plot data.
    Scaling,
    /// Run the invariant suites; exit 2 on any failure.
    Check {
        /// Use the full acceptance sample sizes.
        #[arg(long)]
        full: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Distance { .. } => "distance",
            Command::Quantize { .. } => "quantize",
            Command::Netbounds => "netbounds",
            Command::Cover => "cover",
            Command::Scaling => "scaling",
            Command::Check { .. } => "check",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let start = Instant::now();
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        eps: cli.eps.clone(),
        delta: cli.delta,
    };
    let loaded = config::load(cli.config.as_deref(), &overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation("--threads: must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    pool.build_global()
        .map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    let threads = rayon::current_num_threads();

    let cfg = &loaded.config;
    let mut out = Artifacts::create(&loaded.out)?;
    let result = match &cli.command {
        Command::Sample => commands::sample(cfg, &mut out),
        Command::Distance { f, g, tol } => commands::distance_cmd(f, g, *tol, &mut out),
        Command::Quantize { input } => commands::quantize(cfg, input.as_deref(), &mut out),
        Command::Netbounds => commands::netbounds(cfg, &mut out),
        Command::Cover => commands::cover(cfg, &mut out),
        Command::Scaling => commands::scaling(cfg, &mut out),
        Command::Check { full } => commands::check(cfg, *full, &mut out),
    };
    match result {
        Err(e @ CliError::PropertyFailure(_)) => {
            out.finish(cli.command.name(), cfg, threads, start.elapsed().as_secs_f64())?;
            Err(e)
        }
        Err(e) => Err(e),
        Ok(()) => out.finish(cli.command.name(), cfg, threads, start.elapsed().as_secs_f64()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
