//! `termstruct`: batch front end for yield-curve factor models and BVARs.
//!
//! Each subcommand reads a flat `key = value` config (see `config.rs` for the
//! keys and their defaults), writes CSV tables under `<output>/<command>/`
//! and finishes with a `manifest.txt` of SHA-256 digests.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use termstruct::simulate::{reference_params, simulate_dns, STANDARD_MATURITIES};

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(name = "termstruct", version, about = "Yield-curve factor models and Bayesian VAR forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of the panel and of its train/test split.
    Describe(Common),
    /// Cross-sectional Nelson-Siegel factors, then a VAR on them.
    FitTwoStep(Common),
    /// Principal components of the training yields.
    FitPca(Common),
    /// One-step state-space fit by maximum likelihood.
    FitKalman(Common),
    /// Posterior draws and predictive tables for the configured prior.
    Bvar(Common),
    /// Recursively identified impulse responses.
    Irf(Common),
    /// Sign-restricted impulse responses.
    SignIrf(Common),
    /// Out-of-sample MSFE tables for the configured methods.
    Evaluate(Common),
    /// Write a synthetic yield panel drawn from a persistent factor model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; results go to `<out>/<command>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input yield panel (CSV).
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Override a config entry, e.g. `--set bvar.prior=ssvs`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Destination CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 374)]
    months: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated maturities in months.
    #[arg(long, value_delimiter = ',')]
    maturities: Option<Vec<u32>>,
}

fn simulate(args: &SimulateArgs) -> Result<PathBuf> {
    let mats = args
        .maturities
        .clone()
        .unwrap_or_else(|| STANDARD_MATURITIES.to_vec());
    let params = reference_params(mats.len());
    let (panel, _) = simulate_dns(&params, &mats, args.months, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    panel.save(&args.out)?;
    Ok(args.out.clone())
}

fn run(cli: Cli) -> Result<PathBuf> {
    let (common, f): (&Common, fn(&RunConfig) -> Result<PathBuf>) = match &cli.command {
        Command::Simulate(a) => return simulate(a),
        Command::Describe(c) => (c, commands::describe_cmd),
        Command::FitTwoStep(c) => (c, commands::fit_two_step),
        Command::FitPca(c) => (c, commands::fit_pca),
        Command::FitKalman(c) => (c, commands::fit_kalman),
        Command::Bvar(c) => (c, commands::bvar),
        Command::Irf(c) => (c, commands::irf),
        Command::SignIrf(c) => (c, commands::sign_irf),
        Command::Evaluate(c) => (c, commands::evaluate),
    };
    let ov = Overrides {
        set: common.set.clone(),
        panel: common.panel.clone(),
        seed: common.seed,
        out: common.out.clone(),
    };
    let cfg = RunConfig::load(common.config.as_deref(), &ov)?;
    f(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
