use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fit_rate, BenchError, Field};
use crate::cell::{CellOptions, CorrectorTable, EffectiveOperator};
use crate::grid::{hessian_at, BoxGrid, Grid, GridFunction};
use crate::operator::Operator;
use crate::solver::{solve_dirichlet_nested, DirichletProblem, SolveReport, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Operator name, echoed in reports.
    pub spec: String,
    /// Geometric list of scales, largest first.
    pub epsilons: Vec<f64>,
    /// Grid points per period; the resolution for `epsilon` is this over `epsilon`.
    pub points_per_period: usize,
    pub rhs: Field,
    pub boundary: Field,
    /// Cell resolution used for `F_bar` and correctors.
    pub cell_resolution: usize,
    /// Lattice step of the tabulated effective operator.
    pub effective_step: f64,
    /// Anchors admitted by the corrector table, per coordinate.
    pub corrector_range: (f64, f64),
    pub interior_margin: f64,
    pub tol: f64,
}

impl SweepConfig {
    /// `f = 1`, `g = 0` on the unit interval, `epsilon = 1/8, ..., 1/128`.
    pub fn model_1d(spec: &str) -> Self {
        Self {
            spec: spec.into(),
            epsilons: (3..=7).map(|k| 2f64.powi(-k)).collect(),
            points_per_period: 32,
            rhs: Field::constant(1.0),
            boundary: Field::constant(0.0),
            cell_resolution: 32,
            effective_step: 0.25,
            corrector_range: (-8.0, 8.0),
            interior_margin: 0.25,
            tol: 1e-9,
        }
    }

    /// `f = 10`, `g = 0` on the unit square, `epsilon = 1/8, 1/16, 1/32`.
    pub fn model_2d(spec: &str) -> Self {
        Self {
            spec: spec.into(),
            epsilons: (3..=5).map(|k| 2f64.powi(-k)).collect(),
            points_per_period: 8,
            rhs: Field::constant(10.0),
            boundary: Field::constant(0.0),
            cell_resolution: 8,
            effective_step: 0.25,
            corrector_range: (-16.0, 16.0),
            interior_margin: 0.25,
            tol: 1e-8,
        }
    }

    pub fn resolution(&self, epsilon: f64) -> Result<usize, BenchError> {
        let n = self.points_per_period as f64 / epsilon;
        let r = n.round();
        if (n - r).abs() > 1e-9 || r < 2.0 {
            return Err(BenchError::Config(format!(
                "epsilon {epsilon} does not give an integer resolution with {} points per period",
                self.points_per_period
            )));
        }
        Ok(r as usize)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.epsilons.is_empty() {
            return Err(BenchError::Config("empty epsilon list".into()));
        }
        if self.points_per_period < 8 {
            return Err(BenchError::Config("each epsilon needs at least 8 points per period".into()));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                return Err(BenchError::Config(format!("epsilon {e} outside (0, 1]")));
            }
            self.resolution(e)?;
        }
        let finest = self.finest_resolution()?;
        for &e in &self.epsilons {
            if finest % self.resolution(e)? != 0 {
                return Err(BenchError::Config("resolutions must divide the finest one".into()));
            }
        }
        Ok(())
    }

    pub fn finest_resolution(&self) -> Result<usize, BenchError> {
        let mut best = 0;
        for &e in &self.epsilons {
            best = best.max(self.resolution(e)?);
        }
        Ok(best)
    }

    pub fn cell_options(&self) -> CellOptions {
        CellOptions::new(self.cell_resolution).with_tol(self.tol)
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, ..SolverOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub resolution: usize,
    /// Sup over all nodes of `|u_eps - u_bar|`.
    pub error: f64,
    /// Previous error over this one.
    pub ratio: Option<f64>,
    pub raw_interior: Option<f64>,
    pub corrected_interior: Option<f64>,
    pub report: Option<SolveReport>,
    /// Set when the solve (or the correction) failed.
    pub note: Option<String>,
}

pub struct SweepOutcome {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub effective_report: SolveReport,
    pub u_bar: GridFunction,
    /// `(epsilon, u_eps)` for every successful solve.
    pub solutions: Vec<(f64, GridFunction)>,
    pub rate: Option<f64>,
    pub monotone: bool,
}

/// Restriction of a fine-grid function to a coarser unit grid whose nodes are
/// a subset.
pub fn inject(fine: &GridFunction, coarse: BoxGrid) -> Result<GridFunction, BenchError> {
    let Grid::Box(fg) = fine.grid() else {
        return Err(BenchError::Config("injection needs box grids".into()));
    };
    let (nf, nc) = (fg.intervals()[0], coarse.intervals()[0]);
    if nc == 0 || nf % nc != 0 || fg.dim() != coarse.dim() {
        return Err(BenchError::Config(format!("cannot inject {nf} intervals onto {nc}")));
    }
    let stride = nf / nc;
    let fgrid = *fine.grid();
    let cgrid = Grid::Box(coarse);
    let values = (0..cgrid.len())
        .map(|k| {
            let c = cgrid.coords(k);
            fine.value(fgrid.index([c[0] * stride, c[1] * stride]))
        })
        .collect();
    Ok(GridFunction::new(coarse, values)?)
}

/// Sup over nodes at distance `>= margin` from the boundary of
/// `|u_eps - u_bar|` and of `|u_eps - u_bar - eps^2 w(D_h^2 u_bar(x), x / eps)|`.
pub fn two_scale_error(
    u_eps: &GridFunction,
    u_bar: &GridFunction,
    correctors: &CorrectorTable,
    epsilon: f64,
    margin: f64,
) -> Result<(f64, f64), BenchError> {
    if u_eps.grid() != u_bar.grid() {
        return Err(BenchError::Config("u_eps and u_bar must share a grid".into()));
    }
    let grid = *u_eps.grid();
    let mut raw: f64 = 0.0;
    let mut corrected: f64 = 0.0;
    for k in 0..grid.len() {
        let x = grid.point(k);
        if !grid.has_stencil(k) || grid.distance_to_boundary(x) < margin - 1e-12 {
            continue;
        }
        let diff = u_eps.value(k) - u_bar.value(k);
        let m = hessian_at(u_bar, k)?;
        let w = correctors.eval(&m, [x[0] / epsilon, x[1] / epsilon])?;
        raw = raw.max(diff.abs());
        corrected = corrected.max((diff - epsilon * epsilon * w).abs());
    }
    Ok((raw, corrected))
}

/// Solves the effective problem once on the finest grid, then the oscillating
/// problem for every `epsilon`, and records errors and two-scale corrections.
pub fn homogenization_sweep(op: Arc<dyn Operator>, config: &SweepConfig) -> Result<SweepOutcome, BenchError> {
    config.validate()?;
    let dim = op.dim();
    let finest = config.finest_resolution()?;
    let fine = BoxGrid::unit(dim, finest)?;
    let effective = Arc::new(EffectiveOperator::new(op.clone(), config.cell_options(), config.effective_step)?);
    let eff_problem = DirichletProblem::from_fns(
        effective.clone(),
        f64::INFINITY,
        fine,
        |x| config.rhs.eval(x),
        |x| config.boundary.eval(x),
    )?;
    let (u_bar, effective_report) = solve_dirichlet_nested(&eff_problem, &config.solver_options())?;
    let correctors =
        CorrectorTable::new(op.clone(), config.cell_options(), config.effective_step, config.corrector_range)?;
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut solutions = Vec::new();
    for &eps in &config.epsilons {
        let n = config.resolution(eps)?;
        let grid = BoxGrid::unit(dim, n)?;
        let bar = inject(&u_bar, grid)?;
        let problem =
            DirichletProblem::from_fns(op.clone(), eps, grid, |x| config.rhs.eval(x), |x| config.boundary.eval(x))?;
        let mut row = SweepRow {
            epsilon: eps,
            resolution: n,
            error: f64::NAN,
            ratio: None,
            raw_interior: None,
            corrected_interior: None,
            report: None,
            note: None,
        };
        match solve_dirichlet_nested(&problem, &config.solver_options()) {
            Ok((u, report)) => {
                row.error = u.difference(&bar)?.sup_norm();
                row.report = Some(report);
                match two_scale_error(&u, &bar, &correctors, eps, config.interior_margin) {
                    Ok((raw, corrected)) => {
                        row.raw_interior = Some(raw);
                        row.corrected_interior = Some(corrected);
                    }
                    Err(e) => row.note = Some(format!("two-scale correction skipped: {e}")),
                }
                solutions.push((eps, u));
            }
            Err(e) => row.note = Some(format!("solve failed: {e}")),
        }
        if let Some(prev) = rows.iter().rev().find(|r| r.error.is_finite()) {
            if row.error.is_finite() {
                row.ratio = Some(prev.error / row.error);
            }
        }
        rows.push(row);
    }
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_finite()).collect();
    let eps: Vec<f64> = ok.iter().map(|r| r.epsilon).collect();
    let errs: Vec<f64> = ok.iter().map(|r| r.error).collect();
    let rate = fit_rate(&eps, &errs);
    let monotone = ok.len() == rows.len() && errs.windows(2).all(|w| w[1] < w[0]);
    Ok(SweepOutcome { config: config.clone(), rows, effective_report, u_bar, solutions, rate, monotone })
}
