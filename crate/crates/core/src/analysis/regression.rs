//! Regressions of total on continuous correlation and the co-jump logit.

use super::AnalysisError;
use serde::{Deserialize, Serialize};

/// Estimates, robust covariance and Wald test of a two-parameter model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub model: String,
    /// Parameter names, e.g. `["alpha", "beta"]`.
    pub names: [String; 2],
    pub coefficients: [f64; 2],
    /// Heteroskedasticity-robust covariance of the coefficients.
    pub covariance: [[f64; 2]; 2],
    /// Hypothesized values under the null.
    pub null: [f64; 2],
    pub wald: f64,
    pub wald_df: usize,
    pub p_value: f64,
    /// R² for least squares, McFadden pseudo-R² for the logit.
    pub r_squared: f64,
    pub n: usize,
    /// Logit only: `β₀ + β₁ x` per observation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_predictor: Option<Vec<f64>>,
    /// Logit only: log-likelihood after each iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood_path: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

impl RegressionResult {
    pub fn standard_errors(&self) -> [f64; 2] {
        [self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt()]
    }
}

fn check_inputs(y: &[f64], x: &[f64], min: usize) -> Result<(), AnalysisError> {
    if y.len() != x.len() {
        return Err(AnalysisError::LengthMismatch(y.len(), x.len()));
    }
    if y.len() < min {
        return Err(AnalysisError::TooFew {
            got: y.len(),
            required: min,
        });
    }
    if let Some(i) = y.iter().zip(x).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(AnalysisError::NonFinite(i));
    }
    Ok(())
}

fn inverse(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn sandwich(bread: [[f64; 2]; 2], meat: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut tmp = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = bread[i][0] * meat[0][j] + bread[i][1] * meat[1][j];
        }
    }
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = tmp[i][0] * bread[0][j] + tmp[i][1] * bread[1][j];
        }
    }
    // exact symmetry
    let off = 0.5 * (out[0][1] + out[1][0]);
    out[0][1] = off;
    out[1][0] = off;
    out
}

/// Wald statistic `d' V⁻¹ d` for `d = b − null`. Zero when `d = 0`;
/// infinite when `V` is singular and `d ≠ 0`.
fn wald(b: [f64; 2], null: [f64; 2], v: [[f64; 2]; 2]) -> f64 {
    let d = [b[0] - null[0], b[1] - null[1]];
    if d == [0.0, 0.0] {
        return 0.0;
    }
    match inverse(v) {
        Some(vi) => {
            let w = d[0] * (vi[0][0] * d[0] + vi[0][1] * d[1]) + d[1] * (vi[1][0] * d[0] + vi[1][1] * d[1]);
            if w < 0.0 {
                f64::INFINITY
            } else {
                w
            }
        }
        None => f64::INFINITY,
    }
}

struct Ols {
    intercept: f64,
    slope: f64,
    cov: [[f64; 2]; 2],
    r2: f64,
}

/// OLS of `y` on `(1, x)` with White (HC0) covariance.
fn ols(y: &[f64], x: &[f64]) -> Result<Ols, AnalysisError> {
    let n = y.len() as f64;
    let xm = crate::stats::mean(x);
    let ym = crate::stats::mean(y);
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    if !(sxx > 0.0) {
        return Err(AnalysisError::Collinear);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let sx: f64 = x.iter().sum();
    let sx2: f64 = x.iter().map(|v| v * v).sum();
    let bread = inverse([[n, sx], [sx, sx2]]).ok_or(AnalysisError::Collinear)?;
    let mut meat = [[0.0; 2]; 2];
    for (e, xi) in resid.iter().zip(x) {
        let e2 = e * e;
        meat[0][0] += e2;
        meat[0][1] += e2 * xi;
        meat[1][1] += e2 * xi * xi;
    }
    meat[1][0] = meat[0][1];
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let sst: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };
    Ok(Ols {
        intercept,
        slope,
        cov: sandwich(bread, meat),
        r2,
    })
}

/// OLS of total on continuous correlation, `y = α + β x + e`, with a White
/// robust Wald test of `(α, β) = (0, 1)`.
pub fn ols_wald(y: &[f64], x: &[f64]) -> Result<RegressionResult, AnalysisError> {
    check_inputs(y, x, 3)?;
    let fit = ols(y, x)?;
    let b = [fit.intercept, fit.slope];
    let null = [0.0, 1.0];
    let w = wald(b, null, fit.cov);
    Ok(RegressionResult {
        model: "ols".into(),
        names: ["alpha".into(), "beta".into()],
        coefficients: b,
        covariance: fit.cov,
        null,
        wald: w,
        wald_df: 2,
        p_value: crate::stats::chi_squared_sf(w, 2.0),
        r_squared: fit.r2,
        n: y.len(),
        linear_predictor: None,
        log_likelihood_path: None,
        iterations: None,
        converged: None,
    })
}

/// Weighted form `y/x = α (1/x) + β + e/x`, estimated by OLS on the ratio
/// and reported as `(α, β)`.
pub fn gls_ratio_regression(y: &[f64], x: &[f64]) -> Result<RegressionResult, AnalysisError> {
    check_inputs(y, x, 3)?;
    if let Some(i) = x.iter().position(|&v| v <= 0.0) {
        return Err(AnalysisError::NonPositiveRegressor(x[i], i));
    }
    let ratio: Vec<f64> = y.iter().zip(x).map(|(a, b)| a / b).collect();
    let inv: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
    let fit = ols(&ratio, &inv)?;
    // intercept of the ratio regression is β, slope on 1/x is α
    let b = [fit.slope, fit.intercept];
    let cov = [[fit.cov[1][1], fit.cov[0][1]], [fit.cov[1][0], fit.cov[0][0]]];
    let null = [0.0, 1.0];
    let w = wald(b, null, cov);
    Ok(RegressionResult {
        model: "gls".into(),
        names: ["alpha".into(), "beta".into()],
        coefficients: b,
        covariance: cov,
        null,
        wald: w,
        wald_df: 2,
        p_value: crate::stats::chi_squared_sf(w, 2.0),
        r_squared: fit.r2,
        n: y.len(),
        linear_predictor: None,
        log_likelihood_path: None,
        iterations: None,
        converged: None,
    })
}

fn log_likelihood(y: &[f64], x: &[f64], b: [f64; 2]) -> f64 {
    y.iter()
        .zip(x)
        .map(|(yi, xi)| {
            let t = b[0] + b[1] * xi;
            // log σ(t) = −log(1 + e^{−t}), computed stably
            let log_p = -softplus(-t);
            let log_q = -softplus(t);
            yi * log_p + (1.0 - yi) * log_q
        })
        .sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;

/// Logit `P(indicator) = 1 / (1 + e^{−(β₀ + β₁ cj)})` by Newton iterations
/// with step halving, a sandwich covariance and a Wald test of
/// `(β₀, β₁) = (0, 0)`.
pub fn logit_cojump(indicator: &[bool], cj: &[f64]) -> Result<RegressionResult, AnalysisError> {
    let y: Vec<f64> = indicator.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    check_inputs(&y, cj, 3)?;
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(AnalysisError::ConstantIndicator);
    }
    let scale = crate::stats::sample_variance(cj).sqrt();
    if !(scale > 0.0) {
        return Err(AnalysisError::Collinear);
    }
    let x: Vec<f64> = cj.iter().map(|v| v / scale).collect();
    let max0 = x
        .iter()
        .zip(&y)
        .filter(|p| *p.1 == 0.0)
        .map(|p| *p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let min0 = x
        .iter()
        .zip(&y)
        .filter(|p| *p.1 == 0.0)
        .map(|p| *p.0)
        .fold(f64::INFINITY, f64::min);
    let max1 = x
        .iter()
        .zip(&y)
        .filter(|p| *p.1 == 1.0)
        .map(|p| *p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let min1 = x
        .iter()
        .zip(&y)
        .filter(|p| *p.1 == 1.0)
        .map(|p| *p.0)
        .fold(f64::INFINITY, f64::min);
    if max0 <= min1 || max1 <= min0 {
        return Err(AnalysisError::Separation);
    }

    let mut b = [0.0, 0.0];
    let mut ll = log_likelihood(&y, &x, b);
    let mut path = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_ITER {
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        for (yi, xi) in y.iter().zip(&x) {
            let p = sigmoid(b[0] + b[1] * xi);
            let r = yi - p;
            let w = p * (1.0 - p);
            grad[0] += r;
            grad[1] += r * xi;
            hess[0][0] += w;
            hess[0][1] += w * xi;
            hess[1][1] += w * xi * xi;
        }
        hess[1][0] = hess[0][1];
        if grad[0].hypot(grad[1]) <= GRAD_TOL {
            converged = true;
            break;
        }
        let hi = inverse(hess).ok_or(AnalysisError::Collinear)?;
        let step = [
            hi[0][0] * grad[0] + hi[0][1] * grad[1],
            hi[1][0] * grad[0] + hi[1][1] * grad[1],
        ];
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = [b[0] + t * step[0], b[1] + t * step[1]];
            let cll = log_likelihood(&y, &x, cand);
            if cll >= ll {
                b = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        path.push(ll);
        if !accepted {
            break;
        }
    }

    // sandwich covariance on the scaled regressor
    let mut hess = [[0.0; 2]; 2];
    let mut meat = [[0.0; 2]; 2];
    for (yi, xi) in y.iter().zip(&x) {
        let p = sigmoid(b[0] + b[1] * xi);
        let w = p * (1.0 - p);
        let r2 = (yi - p) * (yi - p);
        hess[0][0] += w;
        hess[0][1] += w * xi;
        hess[1][1] += w * xi * xi;
        meat[0][0] += r2;
        meat[0][1] += r2 * xi;
        meat[1][1] += r2 * xi * xi;
    }
    hess[1][0] = hess[0][1];
    meat[1][0] = meat[0][1];
    let hi = inverse(hess).ok_or(AnalysisError::Collinear)?;
    let v = sandwich(hi, meat);
    // back to the original regressor: β₁ = b₁ / scale
    let coefficients = [b[0], b[1] / scale];
    let covariance = [[v[0][0], v[0][1] / scale], [v[1][0] / scale, v[1][1] / (scale * scale)]];
    let null = [0.0, 0.0];
    let w = wald(b, null, v);
    let pbar = ones as f64 / y.len() as f64;
    let ll0 = y.len() as f64 * (pbar * pbar.ln() + (1.0 - pbar) * (1.0 - pbar).ln());
    Ok(RegressionResult {
        model: "logit".into(),
        names: ["beta0".into(), "beta1".into()],
        coefficients,
        covariance,
        null,
        wald: w,
        wald_df: 2,
        p_value: crate::stats::chi_squared_sf(w, 2.0),
        r_squared: 1.0 - ll / ll0,
        n: y.len(),
        linear_predictor: Some(cj.iter().map(|c| coefficients[0] + coefficients[1] * c).collect()),
        log_likelihood_path: Some(path),
        iterations: Some(iterations),
        converged: Some(converged),
    })
}
