//! Experiments: homogenization sweeps, two-scale errors, Campanato-type
//! decomposition fits and regularity certificates.

mod campanato;
mod certify;
mod report;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use campanato::{campanato_fit, project_onto_level_set, CampanatoLevel, DecompositionFit, EXACT_FLOOR};
pub use certify::{
    regularity_certificate, CenterCertificate, CenterKind, CertificateConfig, CertificateReport, EpsilonCertificate,
};
pub use report::{environment_stamp, write_two_column, ExperimentReport};
pub use sweep::{homogenization_sweep, inject, two_scale_error, SweepConfig, SweepOutcome, SweepRow};

use crate::blayer::BlayerError;
use crate::cell::CellError;
use crate::grid::{GridError, Point};
use crate::solver::SolveError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Blayer(#[from] BlayerError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("fit did not converge: {0}")]
    Fit(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Right-hand side or boundary data `value + g . x + 1/2 x^T H x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Field {
    Constant {
        value: f64,
    },
    Polynomial {
        value: f64,
        #[serde(default)]
        gradient: [f64; 2],
        /// `(h11, h22, h12)`.
        #[serde(default)]
        hessian: [f64; 3],
    },
}

impl Field {
    pub fn constant(value: f64) -> Self {
        Field::Constant { value }
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Field::Constant { value } => *value,
            Field::Polynomial { value, gradient, hessian } => {
                value
                    + gradient[0] * x[0]
                    + gradient[1] * x[1]
                    + 0.5 * (hessian[0] * x[0] * x[0] + hessian[1] * x[1] * x[1])
                    + hessian[2] * x[0] * x[1]
            }
        }
    }
}

/// Least-squares slope of `log(error)` against `log(epsilon)`.
pub fn fit_rate(epsilons: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(errors)
        .filter(|(e, r)| **e > 0.0 && **r > 0.0 && r.is_finite())
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `log2(e_k / e_{k+1})` for consecutive entries of a halving sweep.
pub fn pairwise_rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// `max <= 2 min` over positive values; all-zero families pass.
pub fn within_factor_two(values: &[f64]) -> bool {
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max <= 2.0 * min + 1e-12
}

/// Solves a small dense system with a partially pivoted LU; `None` when the
/// system is singular.
pub(crate) fn solve_dense(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    use faer::prelude::SpSolver;
    let n = b.len();
    let m = faer::Mat::from_fn(n, n, |i, j| a[i][j]);
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let lu = m.partial_piv_lu();
    let u = lu.compute_u();
    if (0..n).any(|i| u.read(i, i).abs() <= 1e-14 * scale) {
        return None;
    }
    let x = lu.solve(faer::Mat::from_fn(n, 1, |i, _| b[i]));
    let x: Vec<f64> = (0..n).map(|i| x.read(i, 0)).collect();
    x.iter().all(|v| v.is_finite()).then_some(x)
}
