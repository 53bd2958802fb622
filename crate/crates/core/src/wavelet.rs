//! Maximal overlap discrete wavelet transform (MODWT).
//!
//! The pyramid algorithm filters the series with the wavelet and scaling
//! filters, then repeatedly filters the scaling coefficients with filters
//! upsampled by `2^(j-1)`. Filtering is circular. A reflecting boundary is
//! obtained by mirroring the series to length `2N` before the circular
//! pyramid and keeping the first `N` coefficients of each band.
//!
//! Raw coefficients at scale `j` lag the event that produced them by the
//! phase delay of the level-`j` equivalent filter. [`align_coefficients`]
//! removes that delay so that coefficient `k` sits at time `k`.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WaveletError {
    #[error("series of length {n} is too short for {levels} levels (need at least {required})")]
    TooShort { n: usize, levels: usize, required: usize },
    #[error("{levels} levels exceed floor(log2 N) = {max} for N = {n}")]
    TooManyLevels { n: usize, levels: usize, max: usize },
    #[error("coefficients are already aligned")]
    AlreadyAligned,
    #[error("coefficients are not aligned")]
    NotAligned,
    #[error("filter must have even length of at least 2")]
    BadFilter,
}

/// MODWT wavelet (high-pass) and scaling (low-pass) filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilter {
    pub name: String,
    /// Wavelet coefficients `h_l`, with `Σ h = 0` and `Σ h² = 1/2`.
    pub h: Vec<f64>,
    /// Scaling coefficients `g_l`, with `Σ g = 1` and `Σ g² = 1/2`.
    pub g: Vec<f64>,
}

impl WaveletFilter {
    /// Builds a filter pair from MODWT scaling coefficients via the
    /// quadrature mirror relation `h_l = (-1)^l g_{L-1-l}`.
    pub fn from_scaling(name: impl Into<String>, g: Vec<f64>) -> Result<Self, WaveletError> {
        if g.len() < 2 || g.len() % 2 != 0 {
            return Err(WaveletError::BadFilter);
        }
        let h = quadrature_mirror(&g);
        Ok(Self {
            name: name.into(),
            h,
            g,
        })
    }

    /// Daubechies 4-tap filter scaled by `1/√2`.
    pub fn d4() -> Self {
        let s3 = 3f64.sqrt();
        let g = vec![(1.0 + s3) / 8.0, (3.0 + s3) / 8.0, (3.0 - s3) / 8.0, (1.0 - s3) / 8.0];
        Self::from_scaling("d4", g).expect("d4 has four taps")
    }

    pub fn haar() -> Self {
        Self::from_scaling("haar", vec![0.5, 0.5]).expect("haar has two taps")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "d4" | "db2" | "daubechies4" => Some(Self::d4()),
            "haar" | "d2" => Some(Self::haar()),
            _ => None,
        }
    }

    pub fn width(&self) -> usize {
        self.g.len()
    }

    /// Width `L_j = 2^(j-1) (L - 1) + 1` of the level-`j` equivalent filter.
    pub fn equivalent_width(&self, j: usize) -> usize {
        if j == 0 {
            return 1;
        }
        (1usize << (j - 1)) * (self.width() - 1) + 1
    }

    /// Level-`j` equivalent wavelet filter (`scaling = false`) or scaling filter.
    pub fn equivalent_filter(&self, j: usize, scaling: bool) -> Vec<f64> {
        let mut acc = vec![1.0];
        for level in 1..=j {
            let base = if level == j && !scaling { &self.h } else { &self.g };
            let stride = 1usize << (level - 1);
            let mut up = vec![0.0; stride * (base.len() - 1) + 1];
            for (l, &c) in base.iter().enumerate() {
                up[l * stride] = c;
            }
            acc = convolve(&acc, &up);
        }
        acc
    }

    /// Circular shift that aligns level-`j` coefficients with time: the
    /// rounded energy centroid of the equivalent filter.
    pub fn phase_shift(&self, j: usize, scaling: bool) -> usize {
        if j == 0 {
            return 0;
        }
        let f = self.equivalent_filter(j, scaling);
        let energy: f64 = f.iter().map(|c| c * c).sum();
        let centroid: f64 = f.iter().enumerate().map(|(l, c)| l as f64 * c * c).sum::<f64>() / energy;
        centroid.round() as usize
    }
}

/// Maps `h` back to `g` (or `g` to `h`): `out_l = (-1)^(l+1) in_{L-1-l}`
/// inverts `h_l = (-1)^l g_{L-1-l}` for even `L`.
pub fn inverse_quadrature_mirror(h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n)
        .map(|l| if l % 2 == 0 { -h[n - 1 - l] } else { h[n - 1 - l] })
        .collect()
}

fn quadrature_mirror(g: &[f64]) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|l| if l % 2 == 0 { g[n - 1 - l] } else { -g[n - 1 - l] })
        .collect()
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Circular,
    #[default]
    Reflecting,
}

/// Wavelet and scaling coefficients of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct ModwtCoefficients {
    filter: WaveletFilter,
    boundary: Boundary,
    n: usize,
    /// `w[j-1]` holds level-`j` coefficients over the extended length.
    w: Vec<Vec<f64>>,
    v: Vec<f64>,
    aligned: bool,
}

impl ModwtCoefficients {
    pub fn levels(&self) -> usize {
        self.w.len()
    }

    /// Number of coefficients per band (the series length).
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn filter(&self) -> &WaveletFilter {
        &self.filter
    }

    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    /// Level-`j` wavelet coefficients, `j` in `1..=levels`.
    pub fn wavelet(&self, j: usize) -> &[f64] {
        &self.w[j - 1][..self.n]
    }

    pub fn scaling(&self) -> &[f64] {
        &self.v[..self.n]
    }

    /// Level-`j` coefficients over the full filtered length (`2N` for a
    /// reflecting boundary).
    pub fn wavelet_extended(&self, j: usize) -> &[f64] {
        &self.w[j - 1]
    }

    pub fn scaling_extended(&self) -> &[f64] {
        &self.v
    }

    /// `true` at the first `L_j - 1` positions of level `j`, whose raw
    /// coefficients depend on the boundary rule.
    pub fn boundary_mask(&self, j: usize) -> Vec<bool> {
        let m = (self.filter.equivalent_width(j) - 1).min(self.n);
        (0..self.n).map(|k| k < m).collect()
    }

    /// Total energy of all bands over the full filtered length.
    pub fn energy(&self) -> f64 {
        let sq = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>();
        self.w.iter().map(|w| sq(w)).sum::<f64>() + sq(&self.v)
    }

    fn shift_all(&mut self, forward: bool) {
        let levels = self.levels();
        for j in 1..=levels {
            let s = self.filter.phase_shift(j, false) % self.w[j - 1].len().max(1);
            if forward {
                self.w[j - 1].rotate_left(s);
            } else {
                self.w[j - 1].rotate_right(s);
            }
        }
        let s = self.filter.phase_shift(levels, true) % self.v.len().max(1);
        if forward {
            self.v.rotate_left(s);
        } else {
            self.v.rotate_right(s);
        }
    }
}

/// Largest level count usable for a series of length `n`: at most
/// `floor(log2 n)`, with the level-`J` filter no wider than `n`.
pub fn max_levels(n: usize, filter: &WaveletFilter) -> usize {
    if n < 2 {
        return 0;
    }
    let mut j = n.ilog2() as usize;
    while j > 0 && filter.equivalent_width(j) > n {
        j -= 1;
    }
    j
}

/// Default depth: `min(floor(log2 N), 6)`, reduced until the level-`J`
/// filter fits in the series.
pub fn default_levels(n: usize, filter: &WaveletFilter) -> usize {
    max_levels(n, filter).min(6)
}

/// Runs the MODWT pyramid to `levels` scales.
pub fn modwt(
    series: &[f64],
    levels: usize,
    filter: &WaveletFilter,
    boundary: Boundary,
) -> Result<ModwtCoefficients, WaveletError> {
    let n = series.len();
    if levels > 0 {
        let max = if n == 0 { 0 } else { n.ilog2() as usize };
        if levels > max {
            return Err(WaveletError::TooManyLevels { n, levels, max });
        }
        let required = filter.equivalent_width(levels);
        if n < required {
            return Err(WaveletError::TooShort { n, levels, required });
        }
    }
    let mut v: Vec<f64> = match boundary {
        Boundary::Circular => series.to_vec(),
        Boundary::Reflecting => series.iter().chain(series.iter().rev()).copied().collect(),
    };
    let m = v.len();
    let mut w = Vec::with_capacity(levels);
    for j in 1..=levels {
        let stride = 1usize << (j - 1);
        let mut wj = vec![0.0; m];
        let mut vj = vec![0.0; m];
        for t in 0..m {
            let (mut a, mut b) = (0.0, 0.0);
            for l in 0..filter.width() {
                let idx = (t + m - (l * stride) % m) % m;
                a += filter.h[l] * v[idx];
                b += filter.g[l] * v[idx];
            }
            wj[t] = a;
            vj[t] = b;
        }
        w.push(wj);
        v = vj;
    }
    Ok(ModwtCoefficients {
        filter: filter.clone(),
        boundary,
        n,
        w,
        v,
        aligned: false,
    })
}

/// Shifts every band so that coefficient `k` is attributed to time `k`.
pub fn align_coefficients(mut coeffs: ModwtCoefficients) -> Result<ModwtCoefficients, WaveletError> {
    if coeffs.aligned {
        return Err(WaveletError::AlreadyAligned);
    }
    coeffs.shift_all(true);
    coeffs.aligned = true;
    Ok(coeffs)
}

/// Undoes [`align_coefficients`].
pub fn unalign_coefficients(mut coeffs: ModwtCoefficients) -> Result<ModwtCoefficients, WaveletError> {
    if !coeffs.aligned {
        return Err(WaveletError::NotAligned);
    }
    coeffs.shift_all(false);
    coeffs.aligned = false;
    Ok(coeffs)
}

/// Per-scale decomposition of the population covariance of `x` and `y`
/// using circular coefficients: returns the wavelet covariance at each
/// level and the covariance of the scaling coefficients. Their sum equals
/// the sample covariance `(1/N) Σ (x - x̄)(y - ȳ)`.
pub fn covariance_by_scale(
    x: &[f64],
    y: &[f64],
    levels: usize,
    filter: &WaveletFilter,
) -> Result<(Vec<f64>, f64), WaveletError> {
    let cx = modwt(x, levels, filter, Boundary::Circular)?;
    let cy = modwt(y, levels, filter, Boundary::Circular)?;
    let n = x.len() as f64;
    let per_scale = (1..=levels)
        .map(|j| crate::stats::dot(cx.wavelet(j), cy.wavelet(j)) / n)
        .collect();
    let (vx, vy) = (cx.scaling(), cy.scaling());
    let (mx, my) = (crate::stats::mean(vx), crate::stats::mean(vy));
    let scaling = vx.iter().zip(vy).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    Ok((per_scale, scaling))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d4_filter_identities() {
        let f = WaveletFilter::d4();
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        let sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        assert!(sum(&f.h).abs() < 1e-15);
        assert!((sum(&f.g) - 1.0).abs() < 1e-15);
        // orthonormal D4 (Σg² = 1) divided by √2
        let s3 = 3f64.sqrt();
        let dwt: Vec<f64> = [1.0 + s3, 3.0 + s3, 3.0 - s3, 1.0 - s3]
            .iter()
            .map(|c| c / (4.0 * 2f64.sqrt()))
            .collect();
        assert!((sq(&dwt) - 1.0).abs() < 1e-15);
        let modwt: Vec<f64> = dwt.iter().map(|c| c / 2f64.sqrt()).collect();
        assert!((sq(&f.g) - sq(&modwt)).abs() < 1e-15);
        assert!((sq(&f.g) - 0.5).abs() < 1e-15);
        assert!((sq(&f.h) - 0.5).abs() < 1e-15);
        assert_eq!(inverse_quadrature_mirror(&f.h), f.g);
    }

    #[test]
    fn equivalent_widths() {
        let f = WaveletFilter::d4();
        assert_eq!(f.equivalent_width(1), 4);
        assert_eq!(f.equivalent_width(3), 13);
        // the convolved filter spans (2^j - 1)(L - 1) + 1 taps
        assert_eq!(f.equivalent_filter(3, false).len(), 22);
        assert_eq!(f.phase_shift(1, false), 2);
    }

    #[test]
    fn constant_series_has_zero_wavelet_coefficients() {
        let x = vec![3.5; 64];
        let c = modwt(&x, 4, &WaveletFilter::d4(), Boundary::Reflecting).unwrap();
        for j in 1..=4 {
            assert!(c.wavelet(j).iter().all(|w| w.abs() < 1e-14));
        }
        let c = align_coefficients(c).unwrap();
        assert!(c.wavelet(1).iter().all(|w| w.abs() < 1e-14));
    }

    #[test]
    fn impulse_energy_is_one() {
        let mut x = vec![0.0; 32];
        x[9] = 1.0;
        let c = modwt(&x, 3, &WaveletFilter::d4(), Boundary::Circular).unwrap();
        assert!((c.energy() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn aligned_impulse_peaks_at_its_position() {
        let mut x = vec![0.0; 64];
        x[20] = 1.0;
        let c = align_coefficients(modwt(&x, 2, &WaveletFilter::d4(), Boundary::Reflecting).unwrap()).unwrap();
        let w1 = c.wavelet(1);
        let argmax = (0..w1.len())
            .max_by(|&a, &b| w1[a].abs().total_cmp(&w1[b].abs()))
            .unwrap();
        assert_eq!(argmax, 20);
    }

    #[test]
    fn align_round_trip_and_double_align() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64).collect();
        let raw = modwt(&x, 3, &WaveletFilter::d4(), Boundary::Reflecting).unwrap();
        let aligned = align_coefficients(raw.clone()).unwrap();
        assert_eq!(align_coefficients(aligned.clone()), Err(WaveletError::AlreadyAligned));
        assert_eq!(unalign_coefficients(aligned).unwrap(), raw);
        assert_eq!(unalign_coefficients(raw), Err(WaveletError::NotAligned));
    }

    #[test]
    fn depth_preconditions() {
        let f = WaveletFilter::d4();
        assert!(matches!(
            modwt(&[1.0; 8], 4, &f, Boundary::Circular),
            Err(WaveletError::TooManyLevels { .. })
        ));
        assert!(matches!(
            modwt(&[1.0; 8], 3, &f, Boundary::Circular),
            Err(WaveletError::TooShort { required: 13, .. })
        ));
        assert_eq!(default_levels(8, &f), 2);
        assert_eq!(default_levels(1024, &f), 6);
        let c = modwt(&[1.0, 2.0], 0, &f, Boundary::Reflecting).unwrap();
        assert_eq!(c.scaling(), &[1.0, 2.0]);
    }

    #[test]
    fn boundary_mask_marks_filter_width() {
        let c = modwt(&[0.0; 32], 2, &WaveletFilter::d4(), Boundary::Reflecting).unwrap();
        assert_eq!(c.boundary_mask(2).iter().filter(|&&b| b).count(), 6);
    }

    #[test]
    fn direct_convolution_oracle() {
        // level-j coefficients equal circular filtering with the equivalent filter
        let x: Vec<f64> = (0..50).map(|i| ((i * 13 + 5) % 17) as f64 - 8.0).collect();
        let f = WaveletFilter::d4();
        let c = modwt(&x, 3, &f, Boundary::Circular).unwrap();
        for j in 1..=3 {
            let hj = f.equivalent_filter(j, false);
            for t in 0..x.len() {
                let direct: f64 = hj.iter().enumerate().map(|(l, h)| h * x[(t + 50 * 10 - l) % 50]).sum();
                assert!((direct - c.wavelet(j)[t]).abs() < 1e-12);
            }
        }
    }
}
