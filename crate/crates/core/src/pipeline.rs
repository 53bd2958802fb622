//! From two tick series to per-day, per-session results.
//!
//! For every trading date and requested session the pipeline synchronizes
//! the session's ticks on refresh times, locates jumps, computes RC, TSCV,
//! JWC and the co-jump matrix, runs the bootstrap test and assembles a
//! [`DayResult`]. The quadratic covariation reported is TSCV, and on days
//! where the test does not reject the continuous covariance off-diagonal is
//! that same TSCV value, so total and continuous correlations coincide.

use crate::analysis::DayResult;
use crate::cojump_test::{self, BootstrapSpec, CojumpTestResult, DEFAULT_REPS};
use crate::estimators::{self, EstimatorSettings};
use crate::ingest::{self, Session, SessionCalendar, TickSeries};
use crate::jumps::{self, CoJumpRecord};
use crate::matrix::Sym2;
use crate::sync::{self, ReturnPanel};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sessions: Vec<Session>,
    pub estimators: EstimatorSettings,
    pub bootstrap_reps: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sessions: Session::ALL.to_vec(),
            estimators: EstimatorSettings::default(),
            bootstrap_reps: DEFAULT_REPS,
            alpha: 0.05,
            seed: 0,
        }
    }
}

/// Result for one panel together with its co-jumps and test details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelOutcome {
    pub day: DayResult,
    pub records: Vec<CoJumpRecord>,
    pub test: Option<CojumpTestResult>,
}

/// A date and session that produced no result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub date: NaiveDate,
    pub session: Session,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// Sorted by date, then session.
    pub days: Vec<DayResult>,
    pub cojumps: Vec<CoJumpRecord>,
    pub tests: Vec<(NaiveDate, Session, CojumpTestResult)>,
    pub skipped: Vec<Skipped>,
}

/// Stream key of the bootstrap for a date and session.
pub fn day_key(date: NaiveDate, session: Session) -> [u64; 2] {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    [(date - epoch).num_days() as u64, session.index()]
}

/// Estimates one synchronized panel.
pub fn analyze_panel(
    panel: &ReturnPanel,
    date: NaiveDate,
    session: Session,
    cfg: &PipelineConfig,
) -> Result<PanelOutcome, crate::Error> {
    let settings = &cfg.estimators;
    let n = panel.len();
    let j1 = settings.detector.locate(&panel.r1);
    let j2 = settings.detector.locate(&panel.r2);
    let g = settings.grid.resolve(&panel.r1, &panel.r2);
    let pm = estimators::ic_matrix(panel, &j1, &j2, g, settings.levels_for(n), settings.filter())?;
    let qv = Sym2::new(
        estimators::tscv(&panel.r1, &panel.r1, g)?,
        estimators::tscv(&panel.r1, &panel.r2, g)?,
        estimators::tscv(&panel.r2, &panel.r2, g)?,
    );
    let spec = BootstrapSpec {
        reps: cfg.bootstrap_reps,
        alpha: cfg.alpha,
        seed: cfg.seed,
        g,
        levels: pm.levels,
        detector: settings.detector.clone(),
    };
    let test = match cojump_test::cojump_test(pm.qv.a12, &pm.ic, n, &spec, &day_key(date, session)) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("{date} {session}: co-jump test not run: {e}");
            None
        }
    };
    let rejected = test.as_ref().is_some_and(|t| t.rejected);
    let ic_star = match &test {
        Some(t) => cojump_test::ic_star_matrix(qv.a12, &pm.ic, t),
        None => Sym2::new(pm.ic.a11, qv.a12, pm.ic.a22),
    };
    let (_, cojumps) = jumps::cojump_variation(&j1, &j2)?;
    let records: Vec<CoJumpRecord> = cojumps.iter().map(|c| CoJumpRecord::new(date, session, c)).collect();
    let day = DayResult {
        date,
        session,
        n,
        g,
        levels: pm.levels,
        rc: pm.qv,
        qv,
        ic: pm.ic,
        ic_star,
        cj: pm.cj,
        total_correlation: qv.correlation(),
        continuous_correlation: ic_star.correlation(),
        z: test.as_ref().map(|t| t.z),
        rejected,
        cojumps: records.len(),
        cojump_day: rejected && !records.is_empty(),
    };
    Ok(PanelOutcome { day, records, test })
}

/// Dedupes and drops ticks outside the calendar.
pub fn clean(series: TickSeries, cal: &SessionCalendar) -> TickSeries {
    ingest::filter_calendar(ingest::dedupe_timestamps(series), cal)
}

type Bucket = BTreeMap<(NaiveDate, Session), [TickSeries; 2]>;

/// Splits two cleaned series into per-date, per-session buckets.
pub fn partition(a: &TickSeries, b: &TickSeries, cal: &SessionCalendar, sessions: &[Session]) -> Bucket {
    let mut out: Bucket = BTreeMap::new();
    for (asset, s) in [a, b].into_iter().enumerate() {
        for t in &s.ticks {
            let Ok(session) = cal.assign_session(t.timestamp) else {
                continue;
            };
            let date = cal.trading_date(t.timestamp);
            for target in [session, Session::Total] {
                if sessions.contains(&target) {
                    let e = out.entry((date, target)).or_insert_with(|| {
                        [
                            TickSeries::new(a.asset_id.clone(), vec![]),
                            TickSeries::new(b.asset_id.clone(), vec![]),
                        ]
                    });
                    e[asset].ticks.push(*t);
                }
            }
        }
    }
    out
}

/// Runs the whole pipeline on two raw tick series.
pub fn run_pipeline(a: TickSeries, b: TickSeries, cal: &SessionCalendar, cfg: &PipelineConfig) -> PipelineOutput {
    let a = clean(a, cal);
    let b = clean(b, cal);
    let buckets: Vec<((NaiveDate, Session), [TickSeries; 2])> =
        partition(&a, &b, cal, &cfg.sessions).into_iter().collect();
    let results: Vec<Result<PanelOutcome, Skipped>> = buckets
        .par_iter()
        .map(|((date, session), [sa, sb])| {
            let skip = |reason: String| Skipped {
                date: *date,
                session: *session,
                reason,
            };
            let panel = sync::synchronize_pair(sa, sb).map_err(|e| skip(e.to_string()))?;
            analyze_panel(&panel, *date, *session, cfg).map_err(|e| skip(e.to_string()))
        })
        .collect();
    let mut out = PipelineOutput::default();
    for r in results {
        match r {
            Ok(o) => {
                if let Some(t) = o.test {
                    out.tests.push((o.day.date, o.day.session, t));
                }
                out.cojumps.extend(o.records);
                out.days.push(o.day);
            }
            Err(s) => {
                log::info!("skipping {} {}: {}", s.date, s.session, s.reason);
                out.skipped.push(s);
            }
        }
    }
    out
}

/// Writes test results as CSV with header `date,session,Z,B,alpha,rejected`.
pub fn write_tests_csv<W: std::io::Write>(
    tests: &[(NaiveDate, Session, CojumpTestResult)],
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| std::io::Error::other(e);
    w.write_record(["date", "session", "Z", "B", "alpha", "rejected"])
        .map_err(err)?;
    for (d, s, t) in tests {
        w.write_record([
            d.to_string(),
            s.to_string(),
            format!("{}", t.z),
            t.b.to_string(),
            format!("{}", t.alpha),
            t.rejected.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()
}
