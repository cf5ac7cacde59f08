//! Periodic fully nonlinear operators `F(M, y)` and their discrete schemes.
//!
//! Every operator is evaluated two ways: exactly on a symmetric matrix
//! ([`Operator::value`]) and on the stencil data of a grid function
//! ([`Operator::active`]), where it is represented at each node by one
//! active affine leaf. On stencil data coming from a quadratic the two agree.

mod diagnostics;
mod examples;
mod scaled;
mod spec;
mod trig;

use std::hash::{Hash, Hasher};

use thiserror::Error;

pub use diagnostics::{ellipticity_margin, holder_modulus, DIAGNOSTIC_SEED};
pub use examples::{build_cabre_caffarelli, build_key_example, builtin, builtin_names, KeyExample};
pub use scaled::{translate_scale, CorrectorField, ScaledOperator};
pub use spec::{Node, OperatorSpec, AUDIT_POINTS_PER_AXIS, SCHEMA_VERSION};
pub use trig::{CoefficientField, TrigPoly, TrigTerm};

use crate::grid::Point;
use crate::matrix::SymMatrix;
use crate::stencil::{direction_weights, SecondDiffs};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension {0} not supported")]
    UnsupportedDim(usize),
    #[error("invalid ellipticity bounds ({lambda}, {big_lambda})")]
    InvalidBounds { lambda: f64, big_lambda: f64 },
    #[error("linear leaf {leaf}: spectrum [{lo}, {hi}] at y = {y:?} leaves [{lambda}, {big_lambda}]")]
    SpectrumOutOfBounds { leaf: String, y: Point, lo: f64, hi: f64, lambda: f64, big_lambda: f64 },
    #[error("leaf {leaf} at y = {y:?}: |a12| = {off} exceeds min(a11, a22) = {diag}; the 9-point stencil is not monotone")]
    NotMonotone { leaf: String, y: Point, off: f64, diag: f64 },
    #[error("pucci leaf {leaf} with bounds ({lower}, {upper}): {reason}")]
    InvalidPucci { leaf: String, lower: f64, upper: f64, reason: String },
    #[error("F(0, y) = {value} at y = {y:?}; operator must have zero source term")]
    NonzeroSource { value: f64, y: Point },
    #[error("empty {0} node")]
    EmptyNode(&'static str),
    #[error("operator is degenerate: observed lower ellipticity estimate {0} <= 0")]
    Degenerate(f64),
    #[error("sample count {got} below minimum {min}")]
    TooFewSamples { got: usize, min: usize },
    #[error("argument error: {0}")]
    Argument(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("spec document: {0}")]
    Parse(String),
}

/// Nonnegative direction weights plus an offset: the linear piece of the
/// scheme selected at one node, `sum_d w_d s_d + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveLeaf {
    pub weights: [f64; 4],
    pub offset: f64,
}

impl ActiveLeaf {
    pub fn from_matrix(a: &SymMatrix, offset: f64) -> Self {
        let w = direction_weights(a);
        Self { weights: [w.w11, w.w22, w.wpp, w.wpm], offset }
    }

    pub fn value(&self, s: &SecondDiffs) -> f64 {
        self.weights.iter().zip(s.d.iter()).map(|(w, d)| w * d).sum::<f64>() + self.offset
    }

    /// Bit-exact fingerprint used for policy-cycle detection.
    pub fn fingerprint<H: Hasher>(&self, state: &mut H) {
        for w in self.weights {
            w.to_bits().hash(state);
        }
        self.offset.to_bits().hash(state);
    }
}

/// A periodic operator usable by the solvers.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    /// Declared ellipticity constants `(lambda, Lambda)` (Frobenius sense).
    fn bounds(&self) -> (f64, f64);

    /// Stable identifier used in caches and reports.
    fn id(&self) -> String;

    /// `F(M, y)`.
    fn value(&self, m: &SymMatrix, y: Point) -> f64;

    /// Active affine piece of the scheme at stencil data `s`.
    fn active(&self, s: &SecondDiffs, y: Point) -> ActiveLeaf;

    fn scheme_value(&self, s: &SecondDiffs, y: Point) -> f64 {
        self.active(s, y).value(s)
    }

    /// Highest coefficient frequency; 0 for `y`-independent operators.
    fn max_frequency(&self) -> u32 {
        0
    }

    /// Checks the monotonicity precondition of the 9-point scheme.
    fn audit_monotone(&self) -> Result<(), OperatorError> {
        Ok(())
    }
}

/// Exact Pucci extremal value from the eigenvalues of `m`.
pub fn pucci_value(m: &SymMatrix, lower: f64, upper: f64, maximal: bool) -> f64 {
    let (ev, _) = m.eigen();
    let eigs: &[f64] = if m.dim() == 1 { &ev[..1] } else { &ev[..] };
    eigs.iter()
        .map(|&e| {
            let (pos, neg) = if maximal { (upper, lower) } else { (lower, upper) };
            if e >= 0.0 {
                pos * e
            } else {
                neg * e
            }
        })
        .sum()
}

/// Minimizer of `apply(A, s)` over diagonally dominant `A` with spectrum in
/// `[lower, upper]`.
///
/// `apply(A, s)` equals `A : H_p` for `a12 >= 0` and `A : H_m` for `a12 <= 0`,
/// where `H_p`, `H_m` share the diagonal `(d11, d22)` and carry off-diagonals
/// `(dpp - d11 - d22) / 2` and `-(dpm - d11 - d22) / 2`. Each half is
/// minimized over the spectral set, falling back to the diagonal face when the
/// unconstrained minimizer has the wrong sign of `a12`.
pub fn pucci_minus_argmin(s: &SecondDiffs, lower: f64, upper: f64) -> SymMatrix {
    let pick = |e: f64| if e >= 0.0 { lower } else { upper };
    if s.dim == 1 {
        return SymMatrix::scalar(pick(s.d[0]));
    }
    let [d11, d22, dpp, dpm] = s.d;
    let diag = SymMatrix::new2(pick(d11), pick(d22), 0.0);
    let half = |off: f64, want_positive: bool| -> SymMatrix {
        let h = SymMatrix::new2(d11, d22, off);
        let (ev, vecs) = h.eigen();
        let a = SymMatrix::outer(2, vecs[0]) * pick(ev[0]) + SymMatrix::outer(2, vecs[1]) * pick(ev[1]);
        let ok = if want_positive { a.m12() >= 0.0 } else { a.m12() <= 0.0 };
        if ok {
            a
        } else {
            diag
        }
    };
    let ap = half(0.5 * (dpp - d11 - d22), true);
    let am = half(-0.5 * (dpm - d11 - d22), false);
    let vp = crate::stencil::apply(&ap, s);
    let vm = crate::stencil::apply(&am, s);
    if vp <= vm {
        ap
    } else {
        am
    }
}

/// Largest ratio `upper / lower` for which every matrix with spectrum
/// `{lower, upper}` is diagonally dominant: `3 + 2 sqrt 2`.
pub const PUCCI_MAX_RATIO: f64 = 5.828_427_124_746_19;
