//! Layered run configuration: flag, then `COJUMP_*` environment variable,
//! then config file, then built-in default.
//!
//! Config files are TOML with the keys below, or a `manifest.json` written by
//! an earlier run.
//!
//! ```toml
//! seed = 7
//! format = "csv"
//! sessions = ["asia", "eu", "us", "total"]
//! alpha = 0.05
//! bootstrap_reps = 999
//! grids = "noise-adaptive"    # or "power-two-thirds", or { fixed = 30 }
//! levels = 4
//! calendar = "calendar.toml"  # relative to this file
//!
//! [experiment]                # simulate
//! replications = 200
//!
//! [ticks]                     # simulate --emit-ticks
//! days = 20
//! ```

use crate::CliError;
use cojump_core::cojump_test::DEFAULT_REPS;
use cojump_core::estimators::{EstimatorSettings, GridRule};
use cojump_core::ingest::{Session, SessionCalendar};
use cojump_core::pipeline::PipelineConfig;
use cojump_core::simulate::{ExperimentConfig, TickPanelConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Contents of a TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub sessions: Option<Vec<Session>>,
    pub alpha: Option<f64>,
    pub bootstrap_reps: Option<usize>,
    pub grids: Option<GridRule>,
    pub levels: Option<usize>,
    pub calendar: Option<PathBuf>,
    pub experiment: Option<ExperimentConfig>,
    pub ticks: Option<TickPanelConfig>,
    /// Calendar text taken from a manifest.
    #[serde(skip)]
    pub calendar_toml: Option<String>,
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub sessions: Option<Vec<Session>>,
    pub alpha: Option<f64>,
    pub bootstrap_reps: Option<usize>,
    pub grids: Option<GridRule>,
    pub levels: Option<usize>,
    pub calendar: Option<PathBuf>,
    pub replications: Option<usize>,
    pub days: Option<usize>,
}

/// Fully resolved configuration, echoed in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub sessions: Vec<Session>,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    pub grids: GridRule,
    pub levels: Option<usize>,
    /// Calendar in its TOML form.
    pub calendar: String,
    pub experiment: ExperimentConfig,
    pub ticks: TickPanelConfig,
}

/// Written as `manifest.json` next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input files as given on the command line.
    pub inputs: Vec<PathBuf>,
    pub emit_ticks: bool,
    pub outputs: Vec<String>,
    pub config: RunConfig,
}

impl From<RunConfig> for FileConfig {
    fn from(c: RunConfig) -> Self {
        Self {
            seed: Some(c.seed),
            format: Some(c.format),
            sessions: Some(c.sessions),
            alpha: Some(c.alpha),
            bootstrap_reps: Some(c.bootstrap_reps),
            grids: Some(c.grids),
            levels: c.levels,
            calendar: None,
            experiment: Some(c.experiment),
            ticks: Some(c.ticks),
            calendar_toml: Some(c.calendar),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads a TOML config or a JSON manifest.
pub fn load_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a manifest: {e}", path.display())))?;
        return Ok(m.config.into());
    }
    let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(cal) = &cfg.calendar {
        if cal.is_relative() {
            cfg.calendar = Some(path.parent().unwrap_or(Path::new(".")).join(cal));
        }
    }
    Ok(cfg)
}

fn load_calendar(path: &Path) -> Result<SessionCalendar, CliError> {
    SessionCalendar::from_toml_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Merges overrides over the file config over defaults and validates.
pub fn resolve(o: &Overrides, f: FileConfig) -> Result<RunConfig, CliError> {
    let calendar = match (&o.calendar, &f.calendar, &f.calendar_toml) {
        (Some(p), _, _) | (None, Some(p), _) => load_calendar(p)?,
        (None, None, Some(text)) => SessionCalendar::from_toml_str(text).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, None, None) => SessionCalendar::default(),
    };
    let grids = o.grids.or(f.grids).unwrap_or_default();
    let levels = o.levels.or(f.levels);
    let mut experiment = f.experiment.unwrap_or_default();
    experiment.grid = grids;
    experiment.levels = levels;
    if let Some(r) = o.replications {
        experiment.replications = r;
    }
    let mut ticks = f.ticks.unwrap_or_default();
    if let Some(d) = o.days {
        ticks.days = d;
    }
    let cfg = RunConfig {
        seed: o.seed.or(f.seed).unwrap_or(0),
        format: o.format.or(f.format).unwrap_or_default(),
        sessions: o
            .sessions
            .clone()
            .or(f.sessions)
            .unwrap_or_else(|| Session::ALL.to_vec()),
        alpha: o.alpha.or(f.alpha).unwrap_or(0.05),
        bootstrap_reps: o.bootstrap_reps.or(f.bootstrap_reps).unwrap_or(DEFAULT_REPS),
        grids,
        levels,
        calendar: calendar.to_toml_string(),
        experiment,
        ticks,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.bootstrap_reps < 2 {
            return bad(format!(
                "bootstrap_reps must be at least 2, got {}",
                self.bootstrap_reps
            ));
        }
        if self.sessions.is_empty() {
            return bad("at least one session is required".into());
        }
        if let GridRule::Fixed(g) = self.grids {
            if g < 2 {
                return bad(format!("a fixed grid needs at least 2 subgrids, got {g}"));
            }
        }
        if self.levels == Some(0) {
            return bad("levels must be at least 1".into());
        }
        Ok(())
    }

    pub fn calendar(&self) -> SessionCalendar {
        SessionCalendar::from_toml_str(&self.calendar).expect("calendar was validated when resolved")
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut sessions = self.sessions.clone();
        sessions.sort();
        sessions.dedup();
        PipelineConfig {
            sessions,
            estimators: EstimatorSettings {
                grid: self.grids,
                levels: self.levels,
                ..EstimatorSettings::default()
            },
            bootstrap_reps: self.bootstrap_reps,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

/// Parses `noise-adaptive`, `power-two-thirds` or a fixed subgrid count.
pub fn parse_grid(s: &str) -> Result<GridRule, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "noise-adaptive" | "adaptive" => Ok(GridRule::NoiseAdaptive),
        "power-two-thirds" | "n23" => Ok(GridRule::PowerTwoThirds),
        other => other
            .parse::<usize>()
            .map(GridRule::Fixed)
            .map_err(|_| format!("`{s}` is not a grid rule (noise-adaptive, power-two-thirds or a number)")),
    }
}
