//! Cell problems, effective operators and their property checks.

mod checks;
mod poisson;
mod solve;
mod table;

use thiserror::Error;

pub use checks::{
    audit_key_hypotheses, check_effective_ellipticity, check_key_equality, check_min_monotonicity,
    check_scaling_identity, corrector_hessian_floor, EllipticityReport, EllipticitySample, KeyAudit,
    KeyEqualityReport, KeySample, MonotonicityReport, MonotonicitySample, ScalingReport, ScalingSample,
    MIN_ELLIPTICITY_TRIALS,
};
pub use solve::{
    cell_residual, cross_check, effective_value, global_cache, richardson, solve_cell, CellCache, CellMethod,
    CellOptions, CellSolution, DiscountStep, DEFAULT_CELL_TOL, DISCOUNT_EXPONENTS, POINTS_PER_FREQUENCY,
};
pub use table::{
    coordinate_count, tabulate_effective, Axis, CorrectorTable, EffectiveOperator, EffectiveTable, MatrixGrid,
    TableEntry,
};

use crate::grid::GridError;
use crate::operator::OperatorError;
use crate::solver::SolveError;

#[derive(Debug, Error)]
pub enum CellError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("operator dimension {operator} does not match anchor dimension {anchor}")]
    DimMismatch { operator: usize, anchor: usize },
    #[error("cell resolution {resolution} below the required {needed}")]
    Underresolved { resolution: usize, needed: usize },
    #[error("cell iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("vanishing-discount value {vanishing} and mean-correction value {mean} differ by more than 10 x {tol:e}")]
    Disagreement { vanishing: f64, mean: f64, tol: f64 },
    #[error("anchor {coords:?} lies outside the tabulated range")]
    Extrapolation { coords: Vec<f64> },
    #[error("tabulation aborted at {coords:?}: {source}")]
    TableAborted { coords: Vec<f64>, partial: Box<EffectiveTable>, source: Box<CellError> },
    #[error("argument error: {0}")]
    Argument(String),
    #[error("i/o: {0}")]
    Io(String),
}
