use std::sync::Arc;

use super::engine::{Engine, Scheme, SolveReport, SolverOptions, YMap};
use super::SolveError;
use crate::grid::{BoxGrid, Grid, GridFunction};
use crate::operator::Operator;
use crate::stencil::SecondDiffs;

/// `F(D^2 u, x / epsilon) - delta u = f` in a box, `u = g` on its boundary.
///
/// `epsilon = f64::INFINITY` freezes the periodic variable at `y = 0`.
#[derive(Clone)]
pub struct DirichletProblem {
    pub operator: Arc<dyn Operator>,
    pub epsilon: f64,
    pub grid: BoxGrid,
    pub rhs: GridFunction,
    pub boundary: GridFunction,
    pub delta: f64,
    pub allow_underresolved: bool,
}

impl DirichletProblem {
    /// `rhs` and `boundary` must live on `grid`; only boundary nodes of
    /// `boundary` are read.
    pub fn new(
        operator: Arc<dyn Operator>,
        epsilon: f64,
        grid: BoxGrid,
        rhs: GridFunction,
        boundary: GridFunction,
    ) -> Result<Self, SolveError> {
        let problem =
            Self { operator, epsilon, grid, rhs, boundary, delta: 0.0, allow_underresolved: false };
        problem.validate()?;
        Ok(problem)
    }

    /// Builds rhs and boundary data from closures.
    pub fn from_fns(
        operator: Arc<dyn Operator>,
        epsilon: f64,
        grid: BoxGrid,
        rhs: impl Fn([f64; 2]) -> f64,
        boundary: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self, SolveError> {
        let f = GridFunction::from_fn(grid, rhs);
        let g = GridFunction::from_fn(grid, boundary);
        Self::new(operator, epsilon, grid, f, g)
    }

    pub fn with_discount(mut self, delta: f64) -> Result<Self, SolveError> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    /// Accepts `epsilon <= 2h` for deliberate under-resolution studies.
    pub fn allow_underresolved(mut self) -> Self {
        self.allow_underresolved = true;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.operator.dim() != self.grid.dim() {
            return Err(SolveError::InvalidProblem(format!(
                "operator dimension {} on a {}-d grid",
                self.operator.dim(),
                self.grid.dim()
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(SolveError::InvalidProblem(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(SolveError::InvalidProblem(format!("discount {} must be finite and >= 0", self.delta)));
        }
        let grid = Grid::Box(self.grid);
        if self.rhs.grid() != &grid || self.boundary.grid() != &grid {
            return Err(SolveError::InvalidProblem("rhs and boundary data must live on the problem grid".into()));
        }
        if !self.rhs.is_finite() {
            return Err(SolveError::InvalidProblem("rhs is not finite".into()));
        }
        if (0..grid.len()).any(|k| grid.is_boundary(k) && !self.boundary.value(k).is_finite()) {
            return Err(SolveError::InvalidProblem("boundary data is not finite".into()));
        }
        let h = self.grid.spacing();
        let oscillates = self.operator.max_frequency() > 0;
        if oscillates && self.epsilon.is_finite() && self.epsilon <= 2.0 * h && !self.allow_underresolved {
            return Err(SolveError::Underresolved { epsilon: self.epsilon, spacing: h });
        }
        Ok(())
    }

    fn ymap(&self) -> YMap {
        if self.epsilon.is_finite() {
            YMap::Scaled(self.epsilon)
        } else {
            YMap::Frozen
        }
    }

    pub(crate) fn engine(&self) -> Engine<'_> {
        let grid = Grid::Box(self.grid);
        Engine::new(Scheme {
            op: self.operator.as_ref(),
            grid,
            ymap: self.ymap(),
            anchor: SecondDiffs::zero(self.grid.dim()),
            delta: self.delta,
            rhs: self.rhs.values().to_vec(),
            ergodic: false,
        })
    }

    fn initial(&self) -> Vec<f64> {
        let grid = Grid::Box(self.grid);
        (0..grid.len()).map(|k| if grid.has_stencil(k) { 0.0 } else { self.boundary.value(k) }).collect()
    }
}

pub fn solve_dirichlet(
    problem: &DirichletProblem,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport), SolveError> {
    let opts = SolverOptions { tol, max_iter, ..SolverOptions::default() };
    solve_dirichlet_with(problem, &opts, None)
}

/// Like [`solve_dirichlet`] with explicit options and an optional warm start
/// (its boundary values are replaced by the problem's).
pub fn solve_dirichlet_with(
    problem: &DirichletProblem,
    opts: &SolverOptions,
    warm: Option<&GridFunction>,
) -> Result<(GridFunction, SolveReport), SolveError> {
    problem.validate()?;
    problem.operator.audit_monotone()?;
    let mut init = problem.initial();
    if let Some(w) = warm {
        if w.grid() != &Grid::Box(problem.grid) {
            return Err(SolveError::InvalidProblem("warm start lives on another grid".into()));
        }
        let grid = Grid::Box(problem.grid);
        for (k, v) in init.iter_mut().enumerate() {
            if grid.has_stencil(k) {
                *v = w.value(k);
            }
        }
    }
    let mut engine = problem.engine();
    let out = engine.solve(init, 0.0, opts)?;
    let u = GridFunction::new(problem.grid, out.values)?;
    Ok((u, out.report))
}

/// Coarse-to-fine solve: halves the grid while the problem stays valid and
/// has at least 8 intervals per axis, then solves upward with bilinear warm
/// starts. Reported iterations are summed over levels.
pub fn solve_dirichlet_nested(
    problem: &DirichletProblem,
    opts: &SolverOptions,
) -> Result<(GridFunction, SolveReport), SolveError> {
    problem.validate()?;
    let mut levels = vec![problem.clone()];
    while let Some(coarse) = coarsen(levels.last().expect("non-empty")) {
        levels.push(coarse);
    }
    let mut warm: Option<GridFunction> = None;
    let mut iterations = 0;
    let mut last = None;
    for level in levels.iter().rev() {
        let start = match &warm {
            Some(w) => Some(prolongate(w, level.grid)?),
            None => None,
        };
        let (u, report) = solve_dirichlet_with(level, opts, start.as_ref())?;
        iterations += report.iterations;
        warm = Some(u.clone());
        last = Some((u, report));
    }
    let (u, mut report) = last.expect("at least one level");
    report.iterations = iterations;
    Ok((u, report))
}

fn coarsen(problem: &DirichletProblem) -> Option<DirichletProblem> {
    let g = problem.grid;
    let n = g.intervals();
    let axes = &n[..g.dim()];
    if axes.iter().any(|&k| k % 2 != 0 || k / 2 < 8) {
        return None;
    }
    let coarse_n = [n[0] / 2, n[1] / 2];
    let coarse = BoxGrid::new(g.dim(), g.lower(), g.upper(), coarse_n).ok()?;
    let fine = Grid::Box(g);
    let pick = |f: &GridFunction| {
        let cg = Grid::Box(coarse);
        let values = (0..cg.len())
            .map(|k| {
                let c = cg.coords(k);
                f.value(fine.index([2 * c[0], 2 * c[1]]))
            })
            .collect();
        GridFunction::new(coarse, values).ok()
    };
    let candidate = DirichletProblem {
        grid: coarse,
        rhs: pick(&problem.rhs)?,
        boundary: pick(&problem.boundary)?,
        ..problem.clone()
    };
    candidate.validate().ok()?;
    Some(candidate)
}

/// Bilinear prolongation onto a grid with twice the intervals.
fn prolongate(coarse: &GridFunction, fine: BoxGrid) -> Result<GridFunction, SolveError> {
    let cg = *coarse.grid();
    let fg = Grid::Box(fine);
    let values = (0..fg.len())
        .map(|k| {
            let c = fg.coords(k);
            let (i0, j0) = (c[0] / 2, c[1] / 2);
            let (i1, j1) = (c[0].div_ceil(2), c[1].div_ceil(2));
            let at = |i: usize, j: usize| coarse.value(cg.index([i, j]));
            0.25 * (at(i0, j0) + at(i1, j0) + at(i0, j1) + at(i1, j1))
        })
        .collect();
    Ok(GridFunction::new(fine, values)?)
}

/// Sup over interior nodes of `|F(D_h^2 u, x / epsilon) - delta u - f|`.
pub fn residual(problem: &DirichletProblem, u: &GridFunction) -> Result<f64, SolveError> {
    if u.grid() != &Grid::Box(problem.grid) {
        return Err(SolveError::InvalidProblem("u lives on another grid".into()));
    }
    Ok(problem.engine().sup_residual(u.values(), 0.0))
}

/// Signed scheme residual at every node (zero on the boundary).
pub fn residual_field(problem: &DirichletProblem, u: &GridFunction) -> Result<GridFunction, SolveError> {
    if u.grid() != &Grid::Box(problem.grid) {
        return Err(SolveError::InvalidProblem("u lives on another grid".into()));
    }
    Ok(GridFunction::new(problem.grid, problem.engine().residuals(u.values(), 0.0))?)
}

/// Slack used when classifying sub- and supersolutions.
pub const AUDIT_SLACK: f64 = 1e-7;

/// Checks `u_sub <= u_super` at every node for a scheme subsolution and a
/// scheme supersolution.
pub fn comparison_audit(
    problem: &DirichletProblem,
    u_sub: &GridFunction,
    u_super: &GridFunction,
) -> Result<bool, SolveError> {
    let sub = residual_field(problem, u_sub)?;
    let sup = residual_field(problem, u_super)?;
    let scale = 1.0 + problem.rhs.sup_norm();
    let slack = AUDIT_SLACK * scale;
    if let Some(k) = (0..sub.len()).find(|&k| sub.value(k) < -slack) {
        return Err(SolveError::AuditInapplicable(format!(
            "first argument is not a subsolution at node {k} (residual {})",
            sub.value(k)
        )));
    }
    if let Some(k) = (0..sup.len()).find(|&k| sup.value(k) > slack) {
        return Err(SolveError::AuditInapplicable(format!(
            "second argument is not a supersolution at node {k} (residual {})",
            sup.value(k)
        )));
    }
    Ok(u_sub.values().iter().zip(u_super.values()).all(|(a, b)| a <= &(b + slack)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::builtin;

    #[test]
    fn prolongation_reproduces_bilinear_functions() {
        let coarse = GridFunction::from_fn(BoxGrid::unit(2, 8).unwrap(), |x| 1.0 + 2.0 * x[0] - x[1] + 3.0 * x[0] * x[1]);
        let fine = prolongate(&coarse, BoxGrid::unit(2, 16).unwrap()).unwrap();
        let g = *fine.grid();
        for k in 0..g.len() {
            let x = g.point(k);
            let exact = 1.0 + 2.0 * x[0] - x[1] + 3.0 * x[0] * x[1];
            assert!((fine.value(k) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn coarsening_stops_at_eight_intervals() {
        let op = Arc::new(builtin("pucci2d").unwrap());
        let p = DirichletProblem::from_fns(op, 0.5, BoxGrid::unit(2, 32).unwrap(), |_| 1.0, |_| 0.0).unwrap();
        let c1 = coarsen(&p).unwrap();
        assert_eq!(c1.grid.intervals()[0], 16);
        let c2 = coarsen(&c1).unwrap();
        assert_eq!(c2.grid.intervals()[0], 8);
        assert!(coarsen(&c2).is_none());
    }

    #[test]
    fn nested_and_direct_solves_agree() {
        let op = Arc::new(builtin("key1d").unwrap());
        let p = DirichletProblem::from_fns(op, 0.125, BoxGrid::unit(1, 128).unwrap(), |x| 5.0 * x[0], |_| 1.0).unwrap();
        let opts = SolverOptions { tol: 1e-11, ..SolverOptions::default() };
        let (a, _) = solve_dirichlet_with(&p, &opts, None).unwrap();
        let (b, _) = solve_dirichlet_nested(&p, &opts).unwrap();
        assert!(a.difference(&b).unwrap().sup_norm() < 1e-9);
    }
}
