//! Per-session summary tables.

use super::DayResult;
use crate::ingest::Session;
use chrono::Datelike;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Summary of one session. Shares are relative to the sum over the
/// intraday sessions present and are `None` for the whole-day session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: Session,
    pub days: usize,
    /// Days with a non positive definite QV or IC* matrix.
    pub non_pd_days: usize,
    pub cojump_days: usize,
    pub cojump_days_share: Option<f64>,
    /// Sum of co-jump variation over co-jump days.
    pub cj_sum: f64,
    /// Share of the co-jump variation (CJ-d), percent.
    pub cj_share: Option<f64>,
    pub mean_qv: f64,
    pub qv_share: Option<f64>,
    /// `100 · Σ CJ / Σ QV`.
    pub cj_qv_pct: f64,
    pub mean_total_correlation: f64,
    pub mean_continuous_correlation: f64,
    /// Median of total minus continuous correlation.
    pub median_correlation_difference: f64,
}

/// Yearly `100 · Σ CJ / Σ QV` per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyRatio {
    pub year: i32,
    pub session: Session,
    pub days: usize,
    pub cj_qv_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub sessions: Vec<SessionSummary>,
    pub yearly: Vec<YearlyRatio>,
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole == 0.0 {
        0.0
    } else {
        100.0 * part / whole
    }
}

fn summarize(session: Session, days: &[&DayResult]) -> SessionSummary {
    let cj_sum: f64 = days.iter().map(|d| d.cojump_variation()).sum();
    let qv_sum: f64 = days.iter().map(|d| d.qv.a12).sum();
    let regular: Vec<&&DayResult> = days.iter().filter(|d| d.is_regular()).collect();
    let total: Vec<f64> = regular.iter().filter_map(|d| d.total_correlation).collect();
    let cont: Vec<f64> = regular.iter().filter_map(|d| d.continuous_correlation).collect();
    let diff: Vec<f64> = regular
        .iter()
        .filter_map(|d| Some(d.total_correlation? - d.continuous_correlation?))
        .collect();
    SessionSummary {
        session,
        days: days.len(),
        non_pd_days: days.len() - regular.len(),
        cojump_days: days.iter().filter(|d| d.cojump_day).count(),
        cojump_days_share: None,
        cj_sum,
        cj_share: None,
        mean_qv: qv_sum / days.len() as f64,
        qv_share: None,
        cj_qv_pct: pct(cj_sum, qv_sum),
        mean_total_correlation: crate::stats::mean(&total),
        mean_continuous_correlation: crate::stats::mean(&cont),
        median_correlation_difference: crate::stats::median(&diff).unwrap_or(f64::NAN),
    }
}

/// Builds the session and yearly tables from day results.
pub fn session_report(days: &[DayResult]) -> SessionReport {
    let mut by_session: BTreeMap<Session, Vec<&DayResult>> = BTreeMap::new();
    let mut by_year: BTreeMap<(i32, Session), Vec<&DayResult>> = BTreeMap::new();
    for d in days {
        by_session.entry(d.session).or_default().push(d);
        by_year.entry((d.date.year(), d.session)).or_default().push(d);
    }
    let mut sessions: Vec<SessionSummary> = by_session.iter().map(|(s, ds)| summarize(*s, ds)).collect();
    let intraday = |s: &SessionSummary| s.session != Session::Total;
    let cj_days: usize = sessions.iter().filter(|s| intraday(s)).map(|s| s.cojump_days).sum();
    let cj: f64 = sessions.iter().filter(|s| intraday(s)).map(|s| s.cj_sum).sum();
    let qv: f64 = sessions.iter().filter(|s| intraday(s)).map(|s| s.mean_qv).sum();
    for s in sessions.iter_mut().filter(|s| s.session != Session::Total) {
        s.cojump_days_share = Some(pct(s.cojump_days as f64, cj_days as f64));
        s.cj_share = Some(pct(s.cj_sum, cj));
        s.qv_share = Some(pct(s.mean_qv, qv));
    }
    let yearly = by_year
        .iter()
        .map(|((year, session), ds)| {
            let cj: f64 = ds.iter().map(|d| d.cojump_variation()).sum();
            let qv: f64 = ds.iter().map(|d| d.qv.a12).sum();
            YearlyRatio {
                year: *year,
                session: *session,
                days: ds.len(),
                cj_qv_pct: pct(cj, qv),
            }
        })
        .collect();
    SessionReport { sessions, yearly }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl SessionReport {
    /// Session table as CSV.
    pub fn sessions_csv(&self) -> String {
        let mut s = String::from(
            "session,days,non_pd_days,cojump_days,cojump_days_share,cj_sum,cj_share,mean_qv,qv_share,cj_qv_pct,mean_total_corr,mean_continuous_corr,median_corr_diff\n",
        );
        for r in &self.sessions {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.session,
                r.days,
                r.non_pd_days,
                r.cojump_days,
                opt(r.cojump_days_share),
                r.cj_sum,
                opt(r.cj_share),
                r.mean_qv,
                opt(r.qv_share),
                r.cj_qv_pct,
                r.mean_total_correlation,
                r.mean_continuous_correlation,
                r.median_correlation_difference
            );
        }
        s
    }

    /// Yearly table as CSV.
    pub fn yearly_csv(&self) -> String {
        let mut s = String::from("year,session,days,cj_qv_pct\n");
        for r in &self.yearly {
            let _ = writeln!(s, "{},{},{},{}", r.year, r.session, r.days, r.cj_qv_pct);
        }
        s
    }

    /// Both tables as aligned text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8}{:>6}{:>8}{:>8}{:>8}{:>8}{:>12}{:>8}{:>9}{:>9}{:>9}{:>9}",
            "session",
            "days",
            "non-pd",
            "cj days",
            "%",
            "CJ-d %",
            "mean QV",
            "QV %",
            "%CJ/QV",
            "total",
            "cont",
            "med diff"
        );
        let pc = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
        for r in &self.sessions {
            let _ = writeln!(
                s,
                "{:<8}{:>6}{:>8}{:>8}{:>8}{:>8}{:>12.4e}{:>8}{:>9.2}{:>9.3}{:>9.3}{:>9.3}",
                r.session.as_str(),
                r.days,
                r.non_pd_days,
                r.cojump_days,
                pc(r.cojump_days_share),
                pc(r.cj_share),
                r.mean_qv,
                pc(r.qv_share),
                r.cj_qv_pct,
                r.mean_total_correlation,
                r.mean_continuous_correlation,
                r.median_correlation_difference
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<6}{:<8}{:>6}{:>9}", "year", "session", "days", "%CJ/QV");
        for r in &self.yearly {
            let _ = writeln!(
                s,
                "{:<6}{:<8}{:>6}{:>9.2}",
                r.year,
                r.session.as_str(),
                r.days,
                r.cj_qv_pct
            );
        }
        s
    }
}
