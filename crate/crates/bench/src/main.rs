//! `hfgi-bench`: reproducible integrator experiments writing CSV and a JSON
//! summary.
//!
//! Worker count comes from `HFGI_WORKERS` (default: available cores). Grid
//! points run on the pool; rows are collected in input order, so output
//! bytes do not depend on the worker count.

mod experiments;
mod output;
mod settings;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use settings::Settings;

#[derive(Parser)]
#[command(name = "hfgi-bench", version, about = "Splitting-integrator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the scheme catalog.
    ListSchemes(Settings),
    /// Check coefficient sums, force counts and order conditions.
    Validate(Settings),
    /// Global error against step size and the fitted order.
    Converge(Settings),
    /// Global error against total force evaluations.
    Efficiency(Settings),
    /// Relative energy error over a long run.
    Drift(Settings),
    /// Reversibility defect and Jacobian determinant.
    Reversibility(Settings),
    /// HMC chains over schemes and step counts.
    HmcScan(Settings),
    /// A single HMC chain with its trajectory log.
    HmcRun(Settings),
}

impl Command {
    fn split(self) -> (&'static str, Settings) {
        match self {
            Command::ListSchemes(s) => ("list-schemes", s),
            Command::Validate(s) => ("validate", s),
            Command::Converge(s) => ("converge", s),
            Command::Efficiency(s) => ("efficiency", s),
            Command::Drift(s) => ("drift", s),
            Command::Reversibility(s) => ("reversibility", s),
            Command::HmcScan(s) => ("hmc-scan", s),
            Command::HmcRun(s) => ("hmc-run", s),
        }
    }
}

fn init_pool() -> Result<()> {
    let Ok(v) = std::env::var("HFGI_WORKERS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("HFGI_WORKERS=`{v}` is not a count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .context("starting worker pool")
}

fn run() -> Result<bool> {
    init_pool()?;
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        // Usage errors exit 1; 2 is reserved for failed assertions.
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };
    let (name, cli) = cli.command.split();
    let settings = Settings::resolve(cli)?;
    let start = Instant::now();
    let outcome = match name {
        "list-schemes" => experiments::list_schemes(&settings)?,
        "validate" => experiments::validate(&settings)?,
        "converge" => experiments::converge(&settings)?,
        "efficiency" => experiments::efficiency(&settings)?,
        "drift" => experiments::drift(&settings)?,
        "reversibility" => experiments::reversibility(&settings)?,
        "hmc-scan" => experiments::hmc_scan(&settings)?,
        _ => experiments::hmc_run(&settings)?,
    };
    let wall = start.elapsed().as_secs_f64();
    let written = output::emit(name, &settings, &outcome, wall, settings.out.as_deref())?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    for a in outcome.assertions.iter().filter(|a| !a.pass) {
        eprintln!("assertion failed: {} ({})", a.name, a.detail);
    }
    Ok(outcome.all_passed())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
