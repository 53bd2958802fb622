//! Command-line front end for simulation, estimation and analysis runs.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use cojump_core::estimators::GridRule;
use cojump_core::ingest::Session;
use config::{Format, Overrides};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Classifies a library error.
    pub fn from_core(e: cojump_core::Error) -> Self {
        use cojump_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Ingest(_) | E::Calendar(_) | E::Sync(_) | E::Analysis(_) => CliError::Data(msg),
            E::Simulation(_) => CliError::Usage(msg),
            E::Wavelet(_) | E::Jump(_) | E::Estimator(_) | E::Test(_) => CliError::Numerical(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cojump",
    version,
    about = "Quadratic covariation, integrated covariance and co-jumps from tick data"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "COJUMP_THREADS")]
    pub threads: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long, env = "COJUMP_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "COJUMP_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "COJUMP_OUT", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, env = "COJUMP_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// Comma-separated sessions: asia,eu,us,total.
    #[arg(long, env = "COJUMP_SESSIONS", value_delimiter = ',')]
    pub sessions: Option<Vec<Session>>,
    /// Significance level of the co-jump test.
    #[arg(long, env = "COJUMP_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "COJUMP_BOOTSTRAP_REPS")]
    pub bootstrap_reps: Option<usize>,
    /// Subgrid rule: noise-adaptive, power-two-thirds, or a fixed count.
    #[arg(long, env = "COJUMP_GRIDS", value_parser = config::parse_grid)]
    pub grids: Option<GridRule>,
    /// Wavelet depth (clamped to what the data allow).
    #[arg(long, env = "COJUMP_LEVELS")]
    pub levels: Option<usize>,
    /// Session calendar file (TOML).
    #[arg(long, env = "COJUMP_CALENDAR")]
    pub calendar: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo grid, or write a simulated tick panel.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write two tick files and the daily truth instead of running the grid.
        #[arg(long)]
        emit_ticks: bool,
        #[arg(long, env = "COJUMP_REPLICATIONS")]
        replications: Option<usize>,
        /// Trading days of the emitted tick panel.
        #[arg(long, env = "COJUMP_DAYS")]
        days: Option<usize>,
    },
    /// Estimate daily covariance matrices and co-jumps from two tick files.
    Estimate {
        #[command(flatten)]
        common: Common,
        ticks_a: PathBuf,
        ticks_b: PathBuf,
    },
    /// Session tables and regressions from day result files.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        format: c.format,
        sessions: c.sessions.clone(),
        alpha: c.alpha,
        bootstrap_reps: c.bootstrap_reps,
        grids: c.grids,
        levels: c.levels,
        calendar: c.calendar.clone(),
        replications: None,
        days: None,
    }
}

fn resolve(common: &Common, o: Overrides) -> Result<config::RunConfig, CliError> {
    let file = match &common.config {
        Some(p) => config::load_file_config(p)?,
        None => config::FileConfig::default(),
    };
    config::resolve(&o, file)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate {
            common,
            emit_ticks,
            replications,
            days,
        } => {
            let cfg = resolve(
                &common,
                Overrides {
                    replications,
                    days,
                    ..overrides(&common)
                },
            )?;
            commands::simulate(&cfg, &common.out, emit_ticks)
        }
        Command::Estimate {
            common,
            ticks_a,
            ticks_b,
        } => {
            let cfg = resolve(&common, overrides(&common))?;
            commands::estimate(&cfg, &ticks_a, &ticks_b, &common.out)
        }
        Command::Analyze { common, inputs } => {
            let cfg = resolve(&common, overrides(&common))?;
            commands::analyze(&cfg, &inputs, &common.out)
        }
    }
}
