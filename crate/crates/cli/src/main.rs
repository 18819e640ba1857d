//! `mvhedge`: prices, hedges and calibrates mean-variance hedging scenarios.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Overrides, Scenario};
use config::{ModelKind, ScenarioConfig};
use failure::Failure;

#[derive(Parser)]
#[command(
    name = "mvhedge",
    version,
    about = "Mean-variance hedging with a decaying risk-aversion schedule"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value and partials of the configured claim.
    Price(Common),
    /// Simulates the hedge and writes ledgers and a summary.
    Hedge(Common),
    /// Fits the risk-aversion intensity to a price series.
    Calibrate(Common),
    /// Tabulates the exponential tilt family over intensities and times to maturity.
    Surface(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths, overriding every path count in the scenario.
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Price series CSV with `date,close` columns.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Hedge ledger CSV to calibrate against instead of the price history.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

type Handler = fn(&Scenario) -> Result<Vec<PathBuf>, Failure>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let (args, cmd): (Common, Handler) = match cli.command {
        Command::Price(a) => (a, commands::cmd_price),
        Command::Hedge(a) => (a, commands::cmd_hedge),
        Command::Calibrate(a) => (a, commands::cmd_calibrate),
        Command::Surface(a) => (a, commands::cmd_surface),
    };
    let cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let overrides = Overrides {
        seed: args.seed,
        paths: args.paths,
        model: args.model,
        prices: args.prices,
        residuals: args.residuals,
    };
    cmd(&Scenario::new(cfg, overrides, args.out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
