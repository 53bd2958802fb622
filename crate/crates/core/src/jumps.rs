//! Jump localization from first-scale wavelet coefficients.
//!
//! A return is flagged as a jump when the aligned level-1 MODWT coefficient
//! at its position exceeds the universal threshold
//! `ξ = √2 · median|W₁| · √(2 ln N) / 0.6745`. The estimated jump is the
//! whole return at that position, so the jump-adjusted return there is zero.
//!
//! A single large return leaks into the neighbouring level-1 coefficients
//! through the filter's side lobes. By default only the largest coefficient
//! of each run of consecutive exceedances is flagged, so one jump yields one
//! index.

use crate::ingest::Session;
use crate::matrix::Sym2;
use crate::wavelet::{self, Boundary, ModwtCoefficients, WaveletFilter};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum JumpError {
    #[error("no coefficients to compute a threshold from")]
    Empty,
    #[error("coefficients must be aligned before detection")]
    NotAligned,
    #[error("length mismatch: {0} returns vs {1} coefficients")]
    LengthMismatch(usize, usize),
    #[error("jump series cover different sample sizes ({0} vs {1})")]
    IndexSpace(usize, usize),
    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
}

/// Which exceedances of the threshold become jump indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Localization {
    /// The largest `|W₁|` of each run of consecutive exceedances.
    #[default]
    PeakPerCluster,
    /// Every position with `|W₁| > ξ`.
    AllExceedances,
}

/// Flagged jump positions of one return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSeries {
    pub threshold: f64,
    /// Increasing positions in the return series.
    pub indices: Vec<usize>,
    /// Return at each flagged index.
    pub sizes: Vec<f64>,
    /// Length of the return series.
    pub n: usize,
}

impl JumpSeries {
    pub fn none(n: usize) -> Self {
        Self {
            threshold: f64::INFINITY,
            indices: Vec::new(),
            sizes: Vec::new(),
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sum of squared jump sizes.
    pub fn variation(&self) -> f64 {
        self.sizes.iter().map(|s| s * s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Same,
    Opposite,
}

/// A jump flagged in both assets at the same refresh-time index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoJump {
    pub index: usize,
    pub size_1: f64,
    pub size_2: f64,
    pub direction: Direction,
}

/// A co-jump labelled with its trading date and session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoJumpRecord {
    pub date: NaiveDate,
    pub session: Session,
    pub index: usize,
    pub size_1: f64,
    pub size_2: f64,
    pub direction: Direction,
}

impl CoJumpRecord {
    pub fn new(date: NaiveDate, session: Session, c: &CoJump) -> Self {
        Self {
            date,
            session,
            index: c.index,
            size_1: c.size_1,
            size_2: c.size_2,
            direction: c.direction,
        }
    }
}

/// Writes records as CSV with header `date,session,index,size_1,size_2,direction`.
pub fn write_cojump_records<W: std::io::Write>(records: &[CoJumpRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| std::io::Error::other(e);
    w.write_record(["date", "session", "index", "size_1", "size_2", "direction"])
        .map_err(err)?;
    for r in records {
        let dir = match r.direction {
            Direction::Same => "same",
            Direction::Opposite => "opposite",
        };
        w.write_record([
            r.date.to_string(),
            r.session.to_string(),
            r.index.to_string(),
            format!("{}", r.size_1),
            format!("{}", r.size_2),
            dir.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()
}

/// Universal threshold for `n` observations.
pub fn universal_threshold(w1: &[f64], n: usize) -> Result<f64, JumpError> {
    let abs: Vec<f64> = w1.iter().map(|w| w.abs()).collect();
    let med = crate::stats::median(&abs).ok_or(JumpError::Empty)?;
    let log_term = (2.0 * (n.max(1) as f64).ln()).sqrt();
    Ok(std::f64::consts::SQRT_2 * med * log_term / 0.6745)
}

/// Flags positions whose aligned level-1 coefficient exceeds `xi`.
pub fn detect_jumps(
    returns: &[f64],
    coeffs: &ModwtCoefficients,
    xi: f64,
    localization: Localization,
) -> Result<JumpSeries, JumpError> {
    if !coeffs.is_aligned() {
        return Err(JumpError::NotAligned);
    }
    if coeffs.len() != returns.len() {
        return Err(JumpError::LengthMismatch(returns.len(), coeffs.len()));
    }
    if xi < 0.0 || xi.is_nan() {
        return Err(JumpError::NegativeThreshold(xi));
    }
    let n = returns.len();
    if coeffs.levels() == 0 {
        return Ok(JumpSeries::none(n));
    }
    let w1 = coeffs.wavelet(1);
    let exceeds = |k: usize| w1[k].abs() > xi;
    let mut indices = Vec::new();
    let mut k = 0;
    while k < n {
        if !exceeds(k) {
            k += 1;
            continue;
        }
        match localization {
            Localization::AllExceedances => {
                indices.push(k);
                k += 1;
            }
            Localization::PeakPerCluster => {
                let mut peak = k;
                while k < n && exceeds(k) {
                    if w1[k].abs() > w1[peak].abs() {
                        peak = k;
                    }
                    k += 1;
                }
                indices.push(peak);
            }
        }
    }
    let sizes = indices.iter().map(|&i| returns[i]).collect();
    Ok(JumpSeries {
        threshold: xi,
        indices,
        sizes,
        n,
    })
}

/// Level-1 detection with the universal threshold computed from the same
/// returns (reflecting boundary, aligned coefficients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDetector {
    pub filter: WaveletFilter,
    pub localization: Localization,
}

impl Default for JumpDetector {
    fn default() -> Self {
        Self {
            filter: WaveletFilter::d4(),
            localization: Localization::default(),
        }
    }
}

impl JumpDetector {
    /// Locates jumps in `returns`. Series shorter than the filter yield no jumps.
    pub fn locate(&self, returns: &[f64]) -> JumpSeries {
        let n = returns.len();
        if n < self.filter.width() || n < 2 {
            return JumpSeries::none(n);
        }
        let coeffs = wavelet::modwt(returns, 1, &self.filter, Boundary::Reflecting)
            .and_then(wavelet::align_coefficients)
            .expect("one level fits any series at least as long as the filter");
        let xi = universal_threshold(coeffs.wavelet(1), n).expect("non-empty coefficients");
        detect_jumps(returns, &coeffs, xi, self.localization).expect("consistent inputs")
    }
}

/// Returns with flagged positions set to zero.
pub fn adjust_returns(returns: &[f64], jumps: &JumpSeries) -> Vec<f64> {
    let mut out = returns.to_vec();
    for &i in &jumps.indices {
        out[i] = 0.0;
    }
    out
}

/// Co-jump variation `Σ ΔJ₁ ΔJ₂` over indices flagged in both series.
pub fn cojump_variation(j1: &JumpSeries, j2: &JumpSeries) -> Result<(f64, Vec<CoJump>), JumpError> {
    if j1.n != j2.n {
        return Err(JumpError::IndexSpace(j1.n, j2.n));
    }
    let (mut a, mut b) = (0, 0);
    let mut cj = 0.0;
    let mut out = Vec::new();
    while a < j1.indices.len() && b < j2.indices.len() {
        match j1.indices[a].cmp(&j2.indices[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                let (s1, s2) = (j1.sizes[a], j2.sizes[b]);
                if s1 != 0.0 && s2 != 0.0 {
                    cj += s1 * s2;
                    out.push(CoJump {
                        index: j1.indices[a],
                        size_1: s1,
                        size_2: s2,
                        direction: if (s1 > 0.0) == (s2 > 0.0) {
                            Direction::Same
                        } else {
                            Direction::Opposite
                        },
                    });
                }
                a += 1;
                b += 1;
            }
        }
    }
    Ok((cj, out))
}

/// Jump variation matrix: squared jump sizes on the diagonal, co-jump
/// variation off the diagonal.
pub fn cojump_matrix(j1: &JumpSeries, j2: &JumpSeries) -> Result<Sym2, JumpError> {
    let (cj, _) = cojump_variation(j1, j2)?;
    Ok(Sym2::new(j1.variation(), cj, j2.variation()))
}
