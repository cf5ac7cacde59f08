//! Second differences along the four lattice directions of the 9-point stencil.
//!
//! A node's discrete second-order data is kept as the 4-vector
//! `(d11, d22, dpp, dpm)`: centered second differences along `e1`, `e2`,
//! `e1 + e2` and `e1 - e2`, each divided by `h^2`. On a quadratic
//! `1/2 x^T M x` they equal `m11`, `m22`, `m11 + 2 m12 + m22` and
//! `m11 - 2 m12 + m22`. In one dimension only `d11` is used.
//!
//! Coefficient matrices act on this data through the monotone splitting
//! `A11 u11 + 2 A12 u12 + A22 u22 =
//!   (A11 - |A12|) d11 + (A22 - |A12|) d22 + A12^+ dpp + A12^- dpm`,
//! which has nonnegative weights whenever `|A12| <= min(A11, A22)`.

use serde::{Deserialize, Serialize};

use crate::matrix::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondDiffs {
    pub dim: usize,
    pub d: [f64; 4],
}

/// Nonnegative weights of a coefficient matrix on the four directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionWeights {
    pub w11: f64,
    pub w22: f64,
    pub wpp: f64,
    pub wpm: f64,
}

impl SecondDiffs {
    pub fn zero(dim: usize) -> Self {
        Self { dim, d: [0.0; 4] }
    }

    /// Exact second differences of the quadratic `1/2 x^T M x`.
    pub fn from_matrix(m: &SymMatrix) -> Self {
        match m.dim() {
            1 => Self { dim: 1, d: [m.m11(), 0.0, 0.0, 0.0] },
            _ => {
                let (a, b, c) = (m.m11(), m.m22(), m.m12());
                Self { dim: 2, d: [a, b, a + 2.0 * c + b, a - 2.0 * c + b] }
            }
        }
    }

    /// Hessian with the standard 4-point centered cross difference,
    /// `u12 = (dpp - dpm) / 4`.
    pub fn hessian(&self) -> SymMatrix {
        match self.dim {
            1 => SymMatrix::scalar(self.d[0]),
            _ => SymMatrix::new2(self.d[0], self.d[1], 0.25 * (self.d[2] - self.d[3])),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for v in out.d.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &SecondDiffs) -> Self {
        let mut out = *self;
        for (v, o) in out.d.iter_mut().zip(other.d.iter()) {
            *v += o;
        }
        out
    }

    pub fn sub(&self, other: &SecondDiffs) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Linear interpolation `(1 - t) self + t other`.
    pub fn lerp(&self, other: &SecondDiffs, t: f64) -> Self {
        self.scale(1.0 - t).add(&other.scale(t))
    }
}

/// Splits a coefficient matrix into direction weights.
pub fn direction_weights(a: &SymMatrix) -> DirectionWeights {
    match a.dim() {
        1 => DirectionWeights { w11: a.m11(), w22: 0.0, wpp: 0.0, wpm: 0.0 },
        _ => {
            let off = a.m12();
            DirectionWeights {
                w11: a.m11() - off.abs(),
                w22: a.m22() - off.abs(),
                wpp: off.max(0.0),
                wpm: (-off).max(0.0),
            }
        }
    }
}

/// Scheme value of the linear operator `A : D^2 u` on stencil data.
pub fn apply(a: &SymMatrix, s: &SecondDiffs) -> f64 {
    let w = direction_weights(a);
    w.w11 * s.d[0] + w.w22 * s.d[1] + w.wpp * s.d[2] + w.wpm * s.d[3]
}

/// Whether the splitting of `a` has nonnegative weights.
pub fn is_monotone(a: &SymMatrix, tol: f64) -> bool {
    let w = direction_weights(a);
    w.w11 >= -tol && w.w22 >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_on_matrix_data_is_exact_contraction() {
        let a = SymMatrix::new2(2.0, 3.0, -0.8);
        let m = SymMatrix::new2(0.3, -1.2, 0.9);
        let s = SecondDiffs::from_matrix(&m);
        assert!((apply(&a, &s) - a.contract(&m)).abs() < 1e-14);
        assert!(s.hessian().max_abs_diff(&m) < 1e-15);
    }

    #[test]
    fn dominance_decides_monotonicity() {
        assert!(is_monotone(&SymMatrix::new2(1.0, 2.0, 1.0), 0.0));
        assert!(!is_monotone(&SymMatrix::new2(1.0, 2.0, 1.5), 0.0));
    }
}
