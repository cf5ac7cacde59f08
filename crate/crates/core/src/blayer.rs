//! Boundary-layer correctors `zeta` with oscillating Dirichlet data
//! `-epsilon^2 w(M, x / epsilon)`, solved for the translated operator
//! `F(M + D^2 w(x / epsilon) + D^2 zeta, x / epsilon) = F_bar(M)`.
//!
//! The domain is the unit square (unit interval in 1-d) with the flat piece
//! `{x2 = 0}` (`{x = 0}`) playing the role of `Gamma`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::{CellError, CellSolution};
use crate::grid::{hessian_norm_field, lp_norm, BoxGrid, Grid, GridError, GridFunction, Region};
use crate::matrix::SymMatrix;
use crate::operator::{translate_scale, Operator, OperatorError};
use crate::solver::{solve_dirichlet_with, DirichletProblem, SolveError, SolveReport, SolverOptions};

#[derive(Debug, Error)]
pub enum BlayerError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Exponents of the reported `L^p` Hessian norms.
pub const LP_EXPONENTS: [f64; 2] = [4.0, 8.0];

#[derive(Clone)]
pub struct BoundaryLayerProblem {
    pub operator: Arc<dyn Operator>,
    pub anchor: SymMatrix,
    pub cell: Arc<CellSolution>,
    pub epsilon: f64,
    pub grid: BoxGrid,
}

impl BoundaryLayerProblem {
    pub fn new(
        operator: Arc<dyn Operator>,
        anchor: SymMatrix,
        cell: Arc<CellSolution>,
        epsilon: f64,
        grid: BoxGrid,
    ) -> Result<Self, BlayerError> {
        if cell.operator_id != operator.id() || cell.anchor.max_abs_diff(&anchor) > 1e-14 {
            return Err(BlayerError::Argument("cell solution does not match (operator, anchor)".into()));
        }
        let unit = grid.lower().iter().take(grid.dim()).all(|v| *v == 0.0)
            && grid.upper().iter().take(grid.dim()).all(|v| *v == 1.0);
        if !unit {
            return Err(BlayerError::Argument("boundary layers live on the unit box".into()));
        }
        if !(epsilon > 2.0 * grid.spacing()) {
            return Err(SolveError::Underresolved { epsilon, spacing: grid.spacing() }.into());
        }
        Ok(Self { operator, anchor, cell, epsilon, grid })
    }

    /// Distance to `Gamma`.
    pub fn gamma_distance(&self, x: [f64; 2]) -> f64 {
        if self.grid.dim() == 1 {
            x[0]
        } else {
            x[1]
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayBand {
    /// Band index `k`: `2^-k <= d < 2^-(k-1)`.
    pub band: u32,
    pub d_lo: f64,
    pub d_hi: f64,
    pub d_mid: f64,
    /// Nodes of the band inside the central strip.
    pub nodes: usize,
    pub sup_hessian: f64,
    /// `epsilon^2 / d_lo^2`.
    pub reference: f64,
    /// `sup_hessian d_lo^2 / epsilon^2`.
    pub ratio: f64,
    /// `d_lo >= 4 epsilon`.
    pub interior: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayProfile {
    pub epsilon: f64,
    pub bands: Vec<DecayBand>,
    /// `(p, ||D^2 zeta||_p)` over the whole box.
    pub lp: Vec<(f64, f64)>,
}

impl DecayProfile {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BlayerError> {
        let io = |e: csv::Error| BlayerError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "band", "d_lo", "d_hi", "d_mid", "sup_hessian", "reference", "ratio", "p", "norm"])
            .map_err(io)?;
        for b in &self.bands {
            w.write_record([
                "band".to_string(),
                b.band.to_string(),
                format!("{:e}", b.d_lo),
                format!("{:e}", b.d_hi),
                format!("{:e}", b.d_mid),
                format!("{:.9e}", b.sup_hessian),
                format!("{:.9e}", b.reference),
                format!("{:.9e}", b.ratio),
                String::new(),
                String::new(),
            ])
            .map_err(io)?;
        }
        for (p, v) in &self.lp {
            let mut row = vec![String::new(); 10];
            row[0] = "lp".into();
            row[8] = format!("{p}");
            row[9] = format!("{v:.9e}");
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| BlayerError::Io(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryLayerSolution {
    pub zeta: GridFunction,
    pub epsilon: f64,
    pub sup_abs: f64,
    /// `max_{boundary} |epsilon^2 w(M, x / epsilon)|`.
    pub boundary_sup: f64,
    pub profile: DecayProfile,
    pub report: SolveReport,
}

/// Per-band sup of `|D_h^2 zeta|` over dyadic distance bands from `Gamma`,
/// restricted to the central strip `x1 in [1/4, 3/4]` and `d <= 1/2` (2-d),
/// plus the `L^p` Hessian norms.
pub fn decay_profile(zeta: &GridFunction, epsilon: f64) -> Result<DecayProfile, BlayerError> {
    let grid = zeta.grid();
    let Grid::Box(b) = grid else {
        return Err(BlayerError::Argument("decay profiles need a box grid".into()));
    };
    let dim = b.dim();
    let h = b.spacing();
    let hess = hessian_norm_field(zeta);
    let dist = |p: [f64; 2]| if dim == 1 { p[0] } else { p[1] };
    let in_strip = |p: [f64; 2]| dim == 1 || (p[0] >= 0.25 - 1e-12 && p[0] <= 0.75 + 1e-12);
    let mut bands = Vec::new();
    let mut k = 2u32;
    loop {
        let d_hi = 2f64.powi(1 - k as i32);
        let d_lo = 2f64.powi(-(k as i32));
        if d_lo < h {
            break;
        }
        let mut sup: f64 = 0.0;
        let mut nodes = 0;
        for n in 0..grid.len() {
            if !grid.has_stencil(n) {
                continue;
            }
            let p = grid.point(n);
            let d = dist(p);
            if d >= d_lo - 1e-12 && d < d_hi - 1e-12 && in_strip(p) {
                sup = sup.max(hess.value(n));
                nodes += 1;
            }
        }
        let eps2 = epsilon * epsilon;
        bands.push(DecayBand {
            band: k,
            d_lo,
            d_hi,
            d_mid: 0.5 * (d_lo + d_hi),
            nodes,
            sup_hessian: sup,
            reference: eps2 / (d_lo * d_lo),
            ratio: sup * d_lo * d_lo / eps2,
            interior: d_lo >= 4.0 * epsilon,
        });
        k += 1;
    }
    let lp = LP_EXPONENTS
        .iter()
        .map(|&p| Ok((p, lp_norm(&hess, p, &Region::Interior)?)))
        .collect::<Result<Vec<_>, GridError>>()?;
    Ok(DecayProfile { epsilon, bands, lp })
}

pub fn solve_boundary_layer(problem: &BoundaryLayerProblem, tol: f64) -> Result<BoundaryLayerSolution, BlayerError> {
    let scaled = Arc::new(translate_scale(problem.operator.clone(), &problem.anchor, 1.0, &problem.cell)?);
    let eps = problem.epsilon;
    let f_bar = problem.cell.effective_value;
    let w = &problem.cell.corrector;
    let y = |x: [f64; 2]| [x[0] / eps, x[1] / eps];
    let rhs = GridFunction::from_fn(problem.grid, |x| f_bar - scaled.anchor_value(y(x)));
    let boundary = GridFunction::from_fn(problem.grid, |x| -eps * eps * w.interpolate_periodic(y(x)));
    let grid = Grid::Box(problem.grid);
    let boundary_sup = (0..grid.len())
        .filter(|&k| grid.is_boundary(k))
        .map(|k| boundary.value(k).abs())
        .fold(0.0, f64::max);
    let dirichlet = DirichletProblem::new(scaled, eps, problem.grid, rhs, boundary)?;
    let opts = SolverOptions { tol, ..SolverOptions::default() };
    let (zeta, report) = solve_dirichlet_with(&dirichlet, &opts, None)?;
    let profile = decay_profile(&zeta, eps)?;
    Ok(BoundaryLayerSolution { sup_abs: zeta.sup_norm(), zeta, epsilon: eps, boundary_sup, profile, report })
}
