//! Trigonometric polynomials in `y` and symmetric coefficient fields built from them.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::grid::Point;
use crate::matrix::SymMatrix;

/// One term `cos * cos(2 pi k.y) + sin * sin(2 pi k.y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `constant + sum of terms`; 1-periodic in every coordinate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    #[serde(default)]
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn with_cos(mut self, freq: [i32; 2], weight: f64) -> Self {
        self.terms.push(TrigTerm { freq, cos: weight, sin: 0.0 });
        self
    }

    pub fn with_sin(mut self, freq: [i32; 2], weight: f64) -> Self {
        self.terms.push(TrigTerm { freq, cos: 0.0, sin: weight });
        self
    }

    pub fn eval(&self, y: Point) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| {
            let phase = TAU * (t.freq[0] as f64 * y[0] + t.freq[1] as f64 * y[1]);
            let (s, c) = phase.sin_cos();
            acc + t.cos * c + t.sin * s
        })
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0 || t.freq == [0, 0])
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    /// Largest absolute integer frequency over both axes.
    pub fn max_frequency(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.cos != 0.0 || t.sin != 0.0)
            .map(|t| t.freq[0].unsigned_abs().max(t.freq[1].unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Upper bound on the Lipschitz constant in `y` (Euclidean).
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = (t.freq[0] as f64).hypot(t.freq[1] as f64);
                TAU * k * t.cos.hypot(t.sin)
            })
            .sum()
    }
}

/// Symmetric coefficient matrix `A(y)`; only `a11` is read in 1-D.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub a11: TrigPoly,
    #[serde(default)]
    pub a22: TrigPoly,
    #[serde(default)]
    pub a12: TrigPoly,
}

impl CoefficientField {
    pub fn scalar(a: TrigPoly) -> Self {
        Self { a11: a, ..Self::default() }
    }

    pub fn diagonal(a11: TrigPoly, a22: TrigPoly) -> Self {
        Self { a11, a22, a12: TrigPoly::default() }
    }

    /// `a(y) I`.
    pub fn isotropic(a: TrigPoly) -> Self {
        Self { a11: a.clone(), a22: a, a12: TrigPoly::default() }
    }

    pub fn eval(&self, dim: usize, y: Point) -> SymMatrix {
        match dim {
            1 => SymMatrix::scalar(self.a11.eval(y)),
            _ => SymMatrix::new2(self.a11.eval(y), self.a22.eval(y), self.a12.eval(y)),
        }
    }

    pub fn max_frequency(&self) -> u32 {
        self.a11.max_frequency().max(self.a22.max_frequency()).max(self.a12.max_frequency())
    }

    pub fn is_constant(&self) -> bool {
        self.a11.is_constant() && self.a22.is_constant() && self.a12.is_constant()
    }
}
