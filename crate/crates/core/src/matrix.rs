//! Symmetric 2×2 matrices for pairwise covariation.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Sub};

/// A symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        a11: 0.0,
        a12: 0.0,
        a22: 0.0,
    };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.a11 * c, self.a12 * c, self.a22 * c)
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Strict positive definiteness (both leading minors positive).
    pub fn is_positive_definite(&self) -> bool {
        self.a11 > 0.0 && self.a22 > 0.0 && self.determinant() > 0.0
    }

    /// `a12 / sqrt(a11 a22)`, or `None` when a diagonal entry is not positive.
    pub fn correlation(&self) -> Option<f64> {
        if self.a11 > 0.0 && self.a22 > 0.0 {
            Some(self.a12 / (self.a11.sqrt() * self.a22.sqrt()))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self.a11 + rhs.a11, self.a12 + rhs.a12, self.a22 + rhs.a22)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self.a11 - rhs.a11, self.a12 - rhs.a12, self.a22 - rhs.a22)
    }
}
