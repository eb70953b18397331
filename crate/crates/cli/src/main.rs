use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

mod artifacts;
mod calibrate;
mod config;
mod evaluate;
mod predict;
mod report;
mod train;

use config::{Overrides, RunConfig};

/// Prediction intervals for half-hourly electricity prices from generated
/// price scenarios.
#[derive(Debug, Parser)]
#[command(name = "priceband", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration. Flags given here win over its values.
    #[arg(long)]
    config: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input dataset CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit weather-volatility thresholds on the dataset's history.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the three training phases and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the checkpoint in the output directory, skipping
        /// the phases it has already completed.
        #[arg(long)]
        resume: bool,
        /// Training iterations per phase.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Generate scenarios and an interval for one day.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        date: NaiveDate,
        /// Use these afternoon weather variances (temperature,irradiance,wind)
        /// instead of the ones computed from the forecast.
        #[arg(long, value_delimiter = ',')]
        variances: Option<Vec<f64>>,
        /// Scenarios per noise level.
        #[arg(long)]
        scenarios: Option<usize>,
    },
    /// Score repeated prediction runs over a date range.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        /// Number of repeated runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Collect plot data from earlier predict and evaluate outputs.
    Report {
        #[command(flatten)]
        common: Common,
        /// Which predicted day to use for the density heatmap. Defaults to
        /// the latest one.
        #[arg(long)]
        date: Option<NaiveDate>,
    },
}

fn load(common: &Common, extra: Overrides) -> anyhow::Result<RunConfig> {
    let overrides = Overrides {
        seed: common.seed,
        out_dir: common.out.clone(),
        dataset: common.dataset.clone(),
        ..extra
    };
    RunConfig::load(&common.config, overrides)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Calibrate { common } => calibrate::run(&load(&common, Overrides::default())?),
        Command::Train {
            common,
            resume,
            iterations,
        } => {
            let cfg = load(
                &common,
                Overrides {
                    iterations,
                    ..Overrides::default()
                },
            )?;
            train::run(&cfg, resume)
        }
        Command::Predict {
            common,
            date,
            variances,
            scenarios,
        } => {
            let cfg = load(
                &common,
                Overrides {
                    scenarios,
                    ..Overrides::default()
                },
            )?;
            predict::run(&cfg, date, variances.as_deref())
        }
        Command::Evaluate {
            common,
            from,
            to,
            runs,
        } => {
            let cfg = load(
                &common,
                Overrides {
                    runs,
                    ..Overrides::default()
                },
            )?;
            evaluate::run(&cfg, from, to)
        }
        Command::Report { common, date } => report::run(&load(&common, Overrides::default())?, date),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PRICEBAND_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
