//! Batch workflow around the ETAS library: catalog simulation, posterior
//! fitting, model evaluation and forecasting. Every run is reproducible
//! from its configuration file plus seed, and echoes the fully resolved
//! configuration next to its outputs.

mod cmd_evaluate;
mod cmd_fit;
mod cmd_forecast;
mod cmd_simulate;
mod common;
mod config;
mod fitdir;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_kv_file, RunConfig};

/// Machine-parseable failure: one line `error[<category>]: <message>`.
#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            category: "config",
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            category: "io",
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            category: "data",
            message: message.into(),
        }
    }
}

impl From<etas::EtasError> for CliError {
    fn from(e: etas::EtasError) -> Self {
        use etas::EtasError::*;
        let category = match &e {
            Io { .. } => "io",
            MalformedRow { .. } | EmptyCatalog | InsufficientData(_) | Mismatch(_) => "data",
            InvalidParameter(_) | InvalidWindow(_) | Unstable(_) => "config",
            EventCapExceeded { .. } => "simulate",
            InitFailed { .. } | ZeroIntensity { .. } => "sampler",
        };
        CliError {
            category,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "etas",
    about = "Bayesian spatio-temporal ETAS: simulate, fit, evaluate, forecast",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Random seed (overrides the `seed` key).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides the `out` key).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Per-key overrides, e.g. --set t_end=300.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic catalog through the branching cascade.
    Simulate(CommonArgs),
    /// Run the latent-branching Gibbs sampler on a catalog.
    Fit(CommonArgs),
    /// Compute DIC and out-of-sample scores for fitted chains.
    Evaluate(CommonArgs),
    /// Monte Carlo forecast over a future horizon from a fitted chain.
    Forecast(CommonArgs),
}

fn build_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut map: BTreeMap<String, String> = match &args.config {
        Some(path) => parse_kv_file(path)?,
        None => BTreeMap::new(),
    };
    for item in &args.set {
        let Some((key, value)) = item.split_once('=') else {
            return Err(CliError::config(format!(
                "--set expects KEY=VALUE, found `{item}`"
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    if let Some(seed) = args.seed {
        map.insert("seed".to_string(), seed.to_string());
    }
    if let Some(out) = &args.out {
        map.insert("out".to_string(), out.display().to_string());
    }
    Ok(RunConfig::new(map))
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => cmd_simulate::run(build_config(args)?),
        Command::Fit(args) => cmd_fit::run(build_config(args)?),
        Command::Evaluate(args) => cmd_evaluate::run(build_config(args)?),
        Command::Forecast(args) => cmd_forecast::run(build_config(args)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category, e.message);
            ExitCode::FAILURE
        }
    }
}
