//! Covariance estimators for a synchronized return pair.
//!
//! * realized covariance (RC): `Σ r₁ r₂`
//! * wavelet realized covariance (WRC): RC split across MODWT scales
//! * bipower covariance (BC): polarization of bipower variation
//! * two-scale realized covariance (TSCV)
//! * jump wavelet covariance (JWC): TSCV computed scale by scale on
//!   jump-adjusted returns
//!
//! The two-scale estimators average the realized covariance over `G`
//! offset subgrids of `G`-step returns and subtract a multiple of the full
//! realized covariance, which removes the bias from i.i.d. microstructure
//! noise.

use crate::jumps::{self, JumpDetector, JumpSeries};
use crate::matrix::Sym2;
use crate::sync::ReturnPanel;
use crate::wavelet::{self, Boundary, ModwtCoefficients, WaveletError, WaveletFilter};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EstimatorError {
    #[error("return series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {required} returns, got {n}")]
    TooFewReturns { n: usize, required: usize },
    #[error("subgrid count G = {g} must satisfy 1 < G < N = {n}")]
    GridOutOfRange { g: usize, n: usize },
    #[error("wavelet transforms differ in length, depth, filter or boundary")]
    TransformMismatch,
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Jump(#[from] jumps::JumpError),
}

fn check_pair(r1: &[f64], r2: &[f64]) -> Result<(), EstimatorError> {
    if r1.len() != r2.len() {
        return Err(EstimatorError::LengthMismatch(r1.len(), r2.len()));
    }
    Ok(())
}

/// `Σ r₁ r₂`.
pub fn realized_covariance(r1: &[f64], r2: &[f64]) -> Result<f64, EstimatorError> {
    check_pair(r1, r2)?;
    if r1.is_empty() {
        return Err(EstimatorError::TooFewReturns { n: 0, required: 1 });
    }
    Ok(crate::stats::dot(r1, r2))
}

pub fn realized_variance(r: &[f64]) -> f64 {
    crate::stats::dot(r, r)
}

/// Realized covariance matrix of a panel.
pub fn realized_matrix(panel: &ReturnPanel) -> Result<Sym2, EstimatorError> {
    Ok(Sym2::new(
        realized_covariance(&panel.r1, &panel.r1)?,
        realized_covariance(&panel.r1, &panel.r2)?,
        realized_covariance(&panel.r2, &panel.r2)?,
    ))
}

/// Scale-by-scale realized covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDecomposition {
    /// Entry `j-1` is scale `j`; the last entry is the scaling band.
    pub per_scale: Vec<f64>,
    pub total: f64,
}

fn same_transform(c1: &ModwtCoefficients, c2: &ModwtCoefficients) -> bool {
    c1.len() == c2.len()
        && c1.levels() == c2.levels()
        && c1.boundary() == c2.boundary()
        && c1.filter() == c2.filter()
        && c1.is_aligned() == c2.is_aligned()
}

/// `Σ_k W¹_{j,k} W²_{j,k}` for each scale plus the scaling band. With a
/// circular transform the total equals the realized covariance.
pub fn wavelet_realized_covariance(
    c1: &ModwtCoefficients,
    c2: &ModwtCoefficients,
) -> Result<ScaleDecomposition, EstimatorError> {
    if !same_transform(c1, c2) {
        return Err(EstimatorError::TransformMismatch);
    }
    let mut per_scale: Vec<f64> = (1..=c1.levels())
        .map(|j| crate::stats::dot(c1.wavelet(j), c2.wavelet(j)))
        .collect();
    per_scale.push(crate::stats::dot(c1.scaling(), c2.scaling()));
    let total = per_scale.iter().sum();
    Ok(ScaleDecomposition { per_scale, total })
}

/// Wavelet covariance per scale averaged over the `N - L_j + 1`
/// coefficients not affected by the boundary. Scales with no such
/// coefficient are `NaN`. Diagnostic only: the sum does not reproduce RC.
pub fn boundary_free_wavelet_covariance(
    c1: &ModwtCoefficients,
    c2: &ModwtCoefficients,
) -> Result<Vec<f64>, EstimatorError> {
    if !same_transform(c1, c2) {
        return Err(EstimatorError::TransformMismatch);
    }
    let f = c1.filter();
    Ok((1..=c1.levels())
        .map(|j| {
            let skip = f.equivalent_width(j) - 1;
            if skip >= c1.len() {
                return f64::NAN;
            }
            let m = (c1.len() - skip) as f64;
            crate::stats::dot(&c1.wavelet(j)[skip..], &c2.wavelet(j)[skip..]) / m
        })
        .collect())
}

/// Bipower variation `(π/2) Σ_{i≥2} |x_i| |x_{i-1}|`.
pub fn bipower_variation(x: &[f64]) -> f64 {
    std::f64::consts::FRAC_PI_2 * x.windows(2).map(|w| w[0].abs() * w[1].abs()).sum::<f64>()
}

/// `¼ [BV(r₁ + r₂) − BV(r₁ − r₂)]`.
pub fn bipower_covariance(r1: &[f64], r2: &[f64]) -> Result<f64, EstimatorError> {
    check_pair(r1, r2)?;
    if r1.len() < 2 {
        return Err(EstimatorError::TooFewReturns {
            n: r1.len(),
            required: 2,
        });
    }
    let sum: Vec<f64> = r1.iter().zip(r2).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = r1.iter().zip(r2).map(|(a, b)| a - b).collect();
    Ok(0.25 * (bipower_variation(&sum) - bipower_variation(&diff)))
}

/// Bipower covariance matrix; the diagonal is the bipower variation.
pub fn bipower_matrix(panel: &ReturnPanel) -> Result<Sym2, EstimatorError> {
    Ok(Sym2::new(
        bipower_covariance(&panel.r1, &panel.r1)?,
        bipower_covariance(&panel.r1, &panel.r2)?,
        bipower_covariance(&panel.r2, &panel.r2)?,
    ))
}

/// Constants of the two-scale estimators for `N` returns and `G` subgrids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleConstants {
    pub n: usize,
    pub g: usize,
    /// Average subgrid size `(N - G + 1) / G`.
    pub n_bar: f64,
    /// Size of the full grid (a single grid, so `N`).
    pub n_s: usize,
    /// `N / (n̄_G (G - 1))`.
    pub c_n: f64,
}

impl TwoScaleConstants {
    pub fn new(n: usize, g: usize) -> Result<Self, EstimatorError> {
        if g <= 1 || g >= n {
            return Err(EstimatorError::GridOutOfRange { g, n });
        }
        let n_bar = (n - g + 1) as f64 / g as f64;
        Ok(Self {
            n,
            g,
            n_bar,
            n_s: n,
            c_n: n as f64 / (n_bar * (g - 1) as f64),
        })
    }

    /// Length of the shortest subgrid return series.
    pub fn min_subgrid_len(&self) -> usize {
        (self.n - self.g + 1) / self.g
    }
}

/// Returns of subgrid `offset`: sums of `g` consecutive returns starting at
/// `offset`, `offset + g`, ... (complete blocks only).
pub fn subgrid_returns(r: &[f64], g: usize, offset: usize) -> Vec<f64> {
    r.get(offset..)
        .unwrap_or(&[])
        .chunks_exact(g)
        .map(|c| c.iter().sum())
        .collect()
}

/// Two-scale realized covariance with `g` subgrids.
pub fn tscv(r1: &[f64], r2: &[f64], g: usize) -> Result<f64, EstimatorError> {
    check_pair(r1, r2)?;
    let k = TwoScaleConstants::new(r1.len(), g)?;
    let avg = (0..g)
        .map(|o| crate::stats::dot(&subgrid_returns(r1, g, o), &subgrid_returns(r2, g, o)))
        .sum::<f64>()
        / g as f64;
    let full = crate::stats::dot(r1, r2);
    Ok(k.c_n * (avg - k.n_bar / k.n_s as f64 * full))
}

/// Rule for the number of subgrids `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridRule {
    /// `ceil(N^(2/3))`.
    PowerTwoThirds,
    Fixed(usize),
    /// Noise-to-signal optimal `ceil((12 ω̂⁴ / IQ̂)^(1/3) N^(2/3))` with
    /// `ω̂² = RV / 2N` and `IQ̂ = IV̂²`, where `IV̂` is a two-scale pilot at
    /// `G₀ = ceil(N^(2/3))` (RV if the pilot is not positive). The larger
    /// value over both assets is used.
    #[default]
    NoiseAdaptive,
}

impl GridRule {
    /// Resolves `G` for a pair of return series, clamped to `[2, N - 1]`.
    pub fn resolve(&self, r1: &[f64], r2: &[f64]) -> usize {
        let n = r1.len();
        let g = match *self {
            GridRule::PowerTwoThirds => (n as f64).powf(2.0 / 3.0).ceil() as usize,
            GridRule::Fixed(g) => return g,
            GridRule::NoiseAdaptive => {
                let nf = n as f64;
                let g0 = GridRule::PowerTwoThirds.resolve(r1, r2);
                let one = |r: &[f64]| {
                    let rv = realized_variance(r);
                    let omega2 = rv / (2.0 * nf);
                    let iv = tscv(r, r, g0).ok().filter(|v| *v > 0.0).unwrap_or(rv);
                    if iv > 0.0 {
                        (12.0 * omega2 * omega2 / (iv * iv)).cbrt() * nf.powf(2.0 / 3.0)
                    } else {
                        2.0
                    }
                };
                one(r1).max(one(r2)).ceil() as usize
            }
        };
        g.clamp(2, n.saturating_sub(1).max(2))
    }
}

/// Jump wavelet covariance result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JwcResult {
    /// Entry `j-1` is scale `j`; the last entry is the scaling band.
    pub per_scale: Vec<f64>,
    pub total: f64,
    pub constants: TwoScaleConstants,
    /// Wavelet depth actually used (limited by the shortest subgrid).
    pub levels: usize,
}

/// Two-scale wavelet covariance of (already jump-adjusted) returns.
///
/// Each subgrid return series is transformed on its own with a circular
/// MODWT. The depth is `levels` reduced to what the shortest subgrid
/// supports.
pub fn jwc(
    r1: &[f64],
    r2: &[f64],
    g: usize,
    levels: usize,
    filter: &WaveletFilter,
) -> Result<JwcResult, EstimatorError> {
    check_pair(r1, r2)?;
    let k = TwoScaleConstants::new(r1.len(), g)?;
    let depth = levels
        .min(wavelet::max_levels(k.min_subgrid_len(), filter))
        .min(wavelet::max_levels(k.n, filter));
    let scales = |a: &[f64], b: &[f64]| -> Result<Vec<f64>, EstimatorError> {
        let ca = wavelet::modwt(a, depth, filter, Boundary::Circular)?;
        let cb = wavelet::modwt(b, depth, filter, Boundary::Circular)?;
        Ok(wavelet_realized_covariance(&ca, &cb)?.per_scale)
    };
    let mut avg = vec![0.0; depth + 1];
    for o in 0..g {
        let s = scales(&subgrid_returns(r1, g, o), &subgrid_returns(r2, g, o))?;
        for (acc, v) in avg.iter_mut().zip(s) {
            *acc += v;
        }
    }
    let full = scales(r1, r2)?;
    let ratio = k.n_bar / k.n_s as f64;
    let per_scale: Vec<f64> = avg
        .iter()
        .zip(&full)
        .map(|(a, f)| k.c_n * (a / g as f64 - ratio * f))
        .collect();
    let total = per_scale.iter().sum();
    Ok(JwcResult {
        per_scale,
        total,
        constants: k,
        levels: depth,
    })
}

/// Settings shared by the matrix estimators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub grid: GridRule,
    /// Wavelet depth; `None` uses the default for the sample size.
    pub levels: Option<usize>,
    pub detector: JumpDetector,
}

impl EstimatorSettings {
    pub fn filter(&self) -> &WaveletFilter {
        &self.detector.filter
    }

    pub fn levels_for(&self, n: usize) -> usize {
        self.levels.unwrap_or_else(|| wavelet::default_levels(n, self.filter()))
    }
}

/// Quadratic covariation, integrated covariance and co-jump matrices of one
/// day or session, with the constants used to compute them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrices {
    /// Realized covariance matrix.
    pub qv: Sym2,
    /// Jump wavelet covariance matrix.
    pub ic: Sym2,
    /// Co-jump variation matrix.
    pub cj: Sym2,
    pub n: usize,
    pub g: usize,
    pub n_bar: f64,
    pub n_s: usize,
    pub c_n: f64,
    pub levels: usize,
}

/// Integrated covariance matrix from jump-adjusted returns: the off-diagonal
/// is JWC of the pair, the diagonal JWC of each adjusted series with itself.
pub fn ic_matrix(
    panel: &ReturnPanel,
    j1: &JumpSeries,
    j2: &JumpSeries,
    g: usize,
    levels: usize,
    filter: &WaveletFilter,
) -> Result<PairMatrices, EstimatorError> {
    check_pair(&panel.r1, &panel.r2)?;
    if j1.n != panel.len() || j2.n != panel.len() {
        return Err(jumps::JumpError::IndexSpace(j1.n.max(j2.n), panel.len()).into());
    }
    let a1 = jumps::adjust_returns(&panel.r1, j1);
    let a2 = jumps::adjust_returns(&panel.r2, j2);
    let off = jwc(&a1, &a2, g, levels, filter)?;
    let d1 = jwc(&a1, &a1, g, levels, filter)?;
    let d2 = jwc(&a2, &a2, g, levels, filter)?;
    let k = off.constants;
    Ok(PairMatrices {
        qv: realized_matrix(panel)?,
        ic: Sym2::new(d1.total, off.total, d2.total),
        cj: jumps::cojump_matrix(j1, j2)?,
        n: k.n,
        g: k.g,
        n_bar: k.n_bar,
        n_s: k.n_s,
        c_n: k.c_n,
        levels: off.levels,
    })
}

/// Detects jumps in both assets and fills all three matrices.
pub fn estimate_pair(panel: &ReturnPanel, settings: &EstimatorSettings) -> Result<PairMatrices, EstimatorError> {
    let j1 = settings.detector.locate(&panel.r1);
    let j2 = settings.detector.locate(&panel.r2);
    let g = settings.grid.resolve(&panel.r1, &panel.r2);
    ic_matrix(panel, &j1, &j2, g, settings.levels_for(panel.len()), settings.filter())
}
