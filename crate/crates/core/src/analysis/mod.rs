//! Correlations, regressions and session summaries built from daily
//! estimates.

pub mod regression;
pub mod report;

pub use regression::{gls_ratio_regression, logit_cojump, ols_wald, RegressionResult};
pub use report::{session_report, SessionReport};

use crate::ingest::Session;
use crate::matrix::Sym2;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("matrix has a non-positive diagonal: {0:?}")]
    NonPositiveDiagonal(Sym2),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {required} observations, got {got}")]
    TooFew { got: usize, required: usize },
    #[error("non-finite value at observation {0}")]
    NonFinite(usize),
    #[error("regressor has no variation; coefficients are not identified")]
    Collinear,
    #[error("regressor must be strictly positive, got {0} at observation {1}")]
    NonPositiveRegressor(f64, usize),
    #[error("indicator takes a single value; the logit is not identified")]
    ConstantIndicator,
    #[error("the indicator is perfectly separated by the regressor; no finite maximum likelihood estimate")]
    Separation,
    #[error("day results file: {0}")]
    Io(String),
}

/// `QV₁₂ / √(QV₁₁ QV₂₂)`.
pub fn total_correlation(qv: &Sym2) -> Result<f64, AnalysisError> {
    qv.correlation().ok_or(AnalysisError::NonPositiveDiagonal(*qv))
}

/// Correlation of the combined continuous covariance matrix.
pub fn continuous_correlation(ic_star: &Sym2) -> Result<f64, AnalysisError> {
    ic_star
        .correlation()
        .ok_or(AnalysisError::NonPositiveDiagonal(*ic_star))
}

/// Estimates for one trading date and session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayResult {
    pub date: NaiveDate,
    pub session: Session,
    /// Synchronized returns.
    pub n: usize,
    /// Subgrid count.
    pub g: usize,
    /// Wavelet depth used by JWC.
    pub levels: usize,
    /// Realized covariance.
    pub rc: Sym2,
    /// Two-scale realized covariance (quadratic covariation).
    pub qv: Sym2,
    /// Jump wavelet covariance.
    pub ic: Sym2,
    /// JWC diagonal with the test-selected off-diagonal.
    pub ic_star: Sym2,
    pub cj: Sym2,
    pub total_correlation: Option<f64>,
    pub continuous_correlation: Option<f64>,
    /// Test statistic, `None` when the test could not be run.
    pub z: Option<f64>,
    pub rejected: bool,
    /// Indices flagged in both assets.
    pub cojumps: usize,
    /// Rejected and at least one co-jump located.
    pub cojump_day: bool,
}

impl DayResult {
    pub fn qv_positive_definite(&self) -> bool {
        self.qv.is_positive_definite()
    }

    pub fn ic_star_positive_definite(&self) -> bool {
        self.ic_star.is_positive_definite()
    }

    /// Both matrices positive definite.
    pub fn is_regular(&self) -> bool {
        self.qv_positive_definite() && self.ic_star_positive_definite()
    }

    /// Co-jump variation counted on co-jump days only.
    pub fn cojump_variation(&self) -> f64 {
        if self.cojump_day {
            self.cj.a12
        } else {
            0.0
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DayRow {
    date: NaiveDate,
    session: Session,
    n: usize,
    g: usize,
    levels: usize,
    rc11: f64,
    rc12: f64,
    rc22: f64,
    qv11: f64,
    qv12: f64,
    qv22: f64,
    ic11: f64,
    ic12: f64,
    ic22: f64,
    icstar11: f64,
    icstar12: f64,
    icstar22: f64,
    cj11: f64,
    cj12: f64,
    cj22: f64,
    total_corr: Option<f64>,
    continuous_corr: Option<f64>,
    z: Option<f64>,
    rejected: bool,
    cojumps: usize,
    cojump_day: bool,
}

impl From<&DayResult> for DayRow {
    fn from(d: &DayResult) -> Self {
        Self {
            date: d.date,
            session: d.session,
            n: d.n,
            g: d.g,
            levels: d.levels,
            rc11: d.rc.a11,
            rc12: d.rc.a12,
            rc22: d.rc.a22,
            qv11: d.qv.a11,
            qv12: d.qv.a12,
            qv22: d.qv.a22,
            ic11: d.ic.a11,
            ic12: d.ic.a12,
            ic22: d.ic.a22,
            icstar11: d.ic_star.a11,
            icstar12: d.ic_star.a12,
            icstar22: d.ic_star.a22,
            cj11: d.cj.a11,
            cj12: d.cj.a12,
            cj22: d.cj.a22,
            total_corr: d.total_correlation,
            continuous_corr: d.continuous_correlation,
            z: d.z,
            rejected: d.rejected,
            cojumps: d.cojumps,
            cojump_day: d.cojump_day,
        }
    }
}

impl From<DayRow> for DayResult {
    fn from(r: DayRow) -> Self {
        Self {
            date: r.date,
            session: r.session,
            n: r.n,
            g: r.g,
            levels: r.levels,
            rc: Sym2::new(r.rc11, r.rc12, r.rc22),
            qv: Sym2::new(r.qv11, r.qv12, r.qv22),
            ic: Sym2::new(r.ic11, r.ic12, r.ic22),
            ic_star: Sym2::new(r.icstar11, r.icstar12, r.icstar22),
            cj: Sym2::new(r.cj11, r.cj12, r.cj22),
            total_correlation: r.total_corr,
            continuous_correlation: r.continuous_corr,
            z: r.z,
            rejected: r.rejected,
            cojumps: r.cojumps,
            cojump_day: r.cojump_day,
        }
    }
}

/// Writes day results as CSV. Floats are written in shortest round-trip form.
pub fn write_day_results<W: std::io::Write>(days: &[DayResult], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    for d in days {
        w.serialize(DayRow::from(d))
            .map_err(|e| AnalysisError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| AnalysisError::Io(e.to_string()))
}

/// Reads day results written by [`write_day_results`].
pub fn read_day_results<R: std::io::Read>(input: R) -> Result<Vec<DayResult>, AnalysisError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<DayRow>()
        .map(|row| row.map(DayResult::from).map_err(|e| AnalysisError::Io(e.to_string())))
        .collect()
}
