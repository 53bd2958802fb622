//! The `simulate`, `estimate` and `analyze` subcommands.

use crate::config::{Format, Manifest, RunConfig};
use crate::CliError;
use chrono::NaiveDate;
use cojump_core::analysis::{self, read_day_results, session_report, write_day_results, DayResult, RegressionResult};
use cojump_core::cojump_test::CojumpTestResult;
use cojump_core::ingest::{self, Session, TickFormat};
use cojump_core::jumps::write_cojump_records;
use cojump_core::pipeline::{run_pipeline, write_tests_csv, Skipped};
use cojump_core::simulate::{run_experiment, simulate_tick_panel, write_experiment_csv};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Collects output files and writes the manifest last.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        log::info!("wrote {}", path.display());
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    fn finish(
        mut self,
        command: &str,
        inputs: &[PathBuf],
        emit_ticks: bool,
        config: &RunConfig,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: inputs.to_vec(),
            emit_ticks,
            outputs: self.written.clone(),
            config: config.clone(),
        };
        self.json("manifest.json", &manifest)
    }
}

fn io_other<E: std::fmt::Display>(e: E) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Runs the Monte Carlo grid, or with `emit_ticks` writes a simulated tick
/// panel instead.
pub fn simulate(cfg: &RunConfig, out: &Path, emit_ticks: bool) -> Result<(), CliError> {
    let mut o = Outputs::new(out)?;
    if emit_ticks {
        let cal = cfg.calendar();
        let panel = simulate_tick_panel(&cfg.ticks, &cal, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
        for s in &panel.series {
            o.write(&format!("ticks_{}.csv", s.asset_id), |w| {
                ingest::write_ticks(s, w).map_err(io_other)
            })?;
        }
        o.write("truth.csv", |w| {
            writeln!(w, "date,ic11,ic12,ic22,cj11,cj12,cj22,jumps")?;
            for (date, day) in &panel.days {
                let (ic, cj) = (day.true_ic, day.true_cj);
                writeln!(
                    w,
                    "{date},{},{},{},{},{},{},{}",
                    ic.a11,
                    ic.a12,
                    ic.a22,
                    cj.a11,
                    cj.a12,
                    cj.a22,
                    day.jumps.len()
                )?;
            }
            Ok(())
        })?;
        o.write("calendar.toml", |w| w.write_all(cfg.calendar.as_bytes()))?;
    } else {
        let results = run_experiment(&cfg.experiment, cfg.seed).map_err(CliError::from_core)?;
        o.write("experiment.csv", |w| write_experiment_csv(&results, w))?;
        o.json("experiment.json", &results)?;
    }
    o.finish("simulate", &[], emit_ticks, cfg)
}

#[derive(Serialize)]
struct TestRow<'a> {
    date: NaiveDate,
    session: Session,
    #[serde(flatten)]
    test: &'a CojumpTestResult,
}

/// Runs the estimation pipeline on two tick files.
pub fn estimate(cfg: &RunConfig, a: &Path, b: &Path, out: &Path) -> Result<(), CliError> {
    let cal = cfg.calendar();
    let fmt = TickFormat::for_calendar(&cal);
    let load = |p: &Path| -> Result<ingest::TickSeries, CliError> {
        let f = File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        let id = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        ingest::load_ticks(std::io::BufReader::new(f), id, &fmt)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
    };
    let (ta, tb) = (load(a)?, load(b)?);
    let result = run_pipeline(ta, tb, &cal, &cfg.pipeline());
    for s in &result.skipped {
        log::warn!("skipped {} {}: {}", s.date, s.session, s.reason);
    }
    let mut o = Outputs::new(out)?;
    let tests: Vec<TestRow> = result
        .tests
        .iter()
        .map(|(date, session, test)| TestRow {
            date: *date,
            session: *session,
            test,
        })
        .collect();
    match cfg.format {
        Format::Csv => {
            o.write("days.csv", |w| write_day_results(&result.days, w).map_err(io_other))?;
            o.write("cojumps.csv", |w| write_cojump_records(&result.cojumps, w))?;
            o.write("tests.csv", |w| write_tests_csv(&result.tests, w))?;
            o.write("skipped.csv", |w| write_skipped(&result.skipped, w))?;
        }
        Format::Json => {
            o.json("days.json", &result.days)?;
            o.json("cojumps.json", &result.cojumps)?;
            o.json("tests.json", &tests)?;
            o.json("skipped.json", &result.skipped)?;
        }
    }
    o.finish("estimate", &[a.to_path_buf(), b.to_path_buf()], false, cfg)
}

fn write_skipped<W: Write>(skipped: &[Skipped], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "session", "reason"]).map_err(io_other)?;
    for s in skipped {
        w.write_record([s.date.to_string(), s.session.to_string(), s.reason.clone()])
            .map_err(io_other)?;
    }
    w.flush()
}

/// A regression that either fitted or failed with a reason.
#[derive(Serialize)]
#[serde(untagged)]
enum Fit {
    Ok(Box<RegressionResult>),
    Failed { error: String },
}

impl From<Result<RegressionResult, analysis::AnalysisError>> for Fit {
    fn from(r: Result<RegressionResult, analysis::AnalysisError>) -> Self {
        match r {
            Ok(r) => Fit::Ok(Box::new(r)),
            Err(e) => Fit::Failed { error: e.to_string() },
        }
    }
}

#[derive(Serialize)]
struct SessionRegressions {
    session: String,
    days: usize,
    /// Days left out for a non positive definite QV or IC* matrix.
    excluded: usize,
    ols: Fit,
    gls: Fit,
    logit: Fit,
}

fn regressions(label: String, days: &[&DayResult]) -> SessionRegressions {
    let regular: Vec<&&DayResult> = days.iter().filter(|d| d.is_regular()).collect();
    let (mut y, mut x, mut ind, mut cj) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for d in &regular {
        if let (Some(t), Some(c)) = (d.total_correlation, d.continuous_correlation) {
            y.push(t);
            x.push(c);
            ind.push(t >= c);
            cj.push(d.cojump_variation());
        }
    }
    SessionRegressions {
        session: label,
        days: days.len(),
        excluded: days.len() - y.len(),
        ols: analysis::ols_wald(&y, &x).into(),
        gls: analysis::gls_ratio_regression(&y, &x).into(),
        logit: analysis::logit_cojump(&ind, &cj).into(),
    }
}

fn load_days(p: &Path) -> Result<Vec<DayResult>, CliError> {
    let err = |e: String| CliError::Data(format!("{}: {e}", p.display()));
    let f = File::open(p).map_err(|e| err(e.to_string()))?;
    if p.extension().is_some_and(|e| e == "json") {
        serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| err(e.to_string()))
    } else {
        read_day_results(f).map_err(|e| err(e.to_string()))
    }
}

/// Builds session tables and regressions from day result files.
pub fn analyze(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut days = Vec::new();
    for p in inputs {
        days.extend(load_days(p)?);
    }
    days.retain(|d| cfg.sessions.contains(&d.session));
    days.sort_by_key(|d| (d.date, d.session));
    if days.len() < 3 {
        return Err(CliError::Data(format!(
            "need at least 3 day results, got {}",
            days.len()
        )));
    }
    let report = session_report(&days);
    let mut groups: Vec<SessionRegressions> = Vec::new();
    for s in Session::ALL {
        let ds: Vec<&DayResult> = days.iter().filter(|d| d.session == s).collect();
        if !ds.is_empty() {
            groups.push(regressions(s.to_string(), &ds));
        }
    }
    let intraday: Vec<&DayResult> = days.iter().filter(|d| d.session != Session::Total).collect();
    if Session::INTRADAY
        .iter()
        .filter(|s| intraday.iter().any(|d| d.session == **s))
        .count()
        > 1
    {
        groups.push(regressions("intraday".into(), &intraday));
    }
    let mut o = Outputs::new(out)?;
    match cfg.format {
        Format::Csv => {
            o.write("sessions.csv", |w| w.write_all(report.sessions_csv().as_bytes()))?;
            o.write("yearly.csv", |w| w.write_all(report.yearly_csv().as_bytes()))?;
        }
        Format::Json => {
            o.json("sessions.json", &report.sessions)?;
            o.json("yearly.json", &report.yearly)?;
        }
    }
    o.write("report.txt", |w| w.write_all(report.to_text().as_bytes()))?;
    o.json("regressions.json", &groups)?;
    o.finish("analyze", inputs, false, cfg)
}
