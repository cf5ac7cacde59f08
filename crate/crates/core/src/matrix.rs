//! Small dense symmetric matrices for dimensions one and two.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Symmetric `dim x dim` matrix, `dim` in {1, 2}.
///
/// Storage is `(m11, m22, m12)`; in one dimension only `m11` is used and the
/// other two slots are kept at zero.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: [f64; 3],
}

impl SymMatrix {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "dimension {dim} not supported");
        Self { dim, entries: [0.0; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        match dim {
            1 => Self::scalar(1.0),
            _ => Self::new2(1.0, 1.0, 0.0),
        }
    }

    /// One-dimensional matrix holding `m`.
    pub fn scalar(m: f64) -> Self {
        Self { dim: 1, entries: [m, 0.0, 0.0] }
    }

    pub fn new2(m11: f64, m22: f64, m12: f64) -> Self {
        Self { dim: 2, entries: [m11, m22, m12] }
    }

    pub fn diag(dim: usize, values: &[f64]) -> Self {
        match dim {
            1 => Self::scalar(values[0]),
            _ => Self::new2(values[0], values[1], 0.0),
        }
    }

    /// Builds a matrix from its grid coordinates: `(m)` in 1-D, `(m11, m22, m12)` in 2-D.
    pub fn from_coords(dim: usize, coords: &[f64]) -> Self {
        match dim {
            1 => Self::scalar(coords[0]),
            _ => Self::new2(coords[0], coords[1], coords[2]),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.entries[0]],
            _ => self.entries.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m11(&self) -> f64 {
        self.entries[0]
    }

    pub fn m22(&self) -> f64 {
        self.entries[1]
    }

    pub fn m12(&self) -> f64 {
        self.entries[2]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of range");
        match (i, j) {
            (0, 0) => self.entries[0],
            (1, 1) => self.entries[1],
            _ => self.entries[2],
        }
    }

    pub fn trace(&self) -> f64 {
        match self.dim {
            1 => self.entries[0],
            _ => self.entries[0] + self.entries[1],
        }
    }

    /// Frobenius norm `(sum_ij N_ij^2)^(1/2)`.
    pub fn norm(&self) -> f64 {
        let [a, b, c] = self.entries;
        match self.dim {
            1 => a.abs(),
            _ => (a * a + b * b + 2.0 * c * c).sqrt(),
        }
    }

    /// Frobenius inner product `A : M = sum_ij A_ij M_ij`.
    pub fn contract(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let [a, b, c] = self.entries;
        let [x, y, z] = other.entries;
        match self.dim {
            1 => a * x,
            _ => a * x + b * y + 2.0 * c * z,
        }
    }

    /// Eigenvalues in ascending order with unit eigenvectors (columns).
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        if self.dim == 1 {
            return ([self.entries[0], self.entries[0]], [[1.0, 0.0], [0.0, 1.0]]);
        }
        let [a, b, c] = self.entries;
        let mean = 0.5 * (a + b);
        let half = 0.5 * (a - b);
        let rad = half.hypot(c);
        let lo = mean - rad;
        let hi = mean + rad;
        if rad <= f64::EPSILON * (mean.abs() + 1.0) {
            return ([lo, hi], [[1.0, 0.0], [0.0, 1.0]]);
        }
        // angle of the eigenvector belonging to `hi`
        let (s, co) = (0.5 * (2.0 * c).atan2(a - b)).sin_cos();
        let v_hi = [co, s];
        let v_lo = [-s, co];
        ([lo, hi], [v_lo, v_hi])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        match self.dim {
            1 => self.entries[0],
            _ => self.eigen().0[1],
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Rank-one matrix `v v^T`.
    pub fn outer(dim: usize, v: [f64; 2]) -> Self {
        match dim {
            1 => Self::scalar(v[0] * v[0]),
            _ => Self::new2(v[0] * v[0], v[1] * v[1], v[0] * v[1]),
        }
    }

    /// `x^T M x` for a displacement vector.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let [a, b, c] = self.entries;
        match self.dim {
            1 => a * x[0] * x[0],
            _ => a * x[0] * x[0] + b * x[1] * x[1] + 2.0 * c * x[0] * x[1],
        }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "[{}]", self.entries[0]),
            _ => write!(
                f,
                "[[{}, {}], [{}, {}]]",
                self.entries[0], self.entries[2], self.entries[2], self.entries[1]
            ),
        }
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for k in 0..3 {
            out.entries[k] += rhs.entries[k];
        }
        out
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: SymMatrix) -> SymMatrix {
        self + (-rhs)
    }
}

impl Neg for SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self * -1.0
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(self, s: f64) -> SymMatrix {
        let mut out = self;
        for e in out.entries.iter_mut() {
            *e *= s;
        }
        out
    }
}
