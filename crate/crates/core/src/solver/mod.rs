//! Monotone finite-difference solvers for `F(D^2 u, x / epsilon) = f`.

mod dirichlet;
pub(crate) mod engine;
pub(crate) mod linear;

use thiserror::Error;

pub use dirichlet::{
    comparison_audit, residual, residual_field, solve_dirichlet, solve_dirichlet_nested, solve_dirichlet_with, DirichletProblem, AUDIT_SLACK,
};
pub use engine::{SolveMethod, SolveReport, SolverOptions};

use crate::grid::GridError;
use crate::operator::OperatorError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("epsilon = {epsilon} does not resolve the oscillation on spacing {spacing} (needs epsilon > 2h)")]
    Underresolved { epsilon: f64, spacing: f64 },
    #[error("no convergence after {iterations} iterations; last sup residual {residual:e}")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("linear solve failed: {0}")]
    Linear(String),
    #[error("comparison audit inapplicable: {0}")]
    AuditInapplicable(String),
}
