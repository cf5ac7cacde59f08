//! The translated and rescaled operator
//! `F_{M,mu}(N, y) = (F(mu N + M + D^2 w(y), y) - F(M + D^2 w(y), y)) / mu`.
//!
//! `M + D^2 w` is stored as full stencil data per cell node, not as a
//! matrix, so cell problems for `F_{M,mu}` on the same torus grid reproduce
//! the base scheme exactly.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{ActiveLeaf, Operator, OperatorError};
use crate::cell::CellSolution;
use crate::grid::{second_diffs_at, Grid, Point, TorusGrid};
use crate::matrix::SymMatrix;
use crate::stencil::SecondDiffs;

/// Stencil data of `M + D^2_h w` on a torus grid, with periodic bilinear
/// interpolation between nodes.
#[derive(Clone, Debug)]
pub struct CorrectorField {
    grid: TorusGrid,
    data: Vec<SecondDiffs>,
}

impl CorrectorField {
    pub fn from_cell(cell: &CellSolution) -> Self {
        let w = &cell.corrector;
        let grid = match w.grid() {
            Grid::Torus(g) => *g,
            Grid::Box(_) => unreachable!("cell correctors live on torus grids"),
        };
        let anchor = SecondDiffs::from_matrix(&cell.anchor);
        let data = (0..w.len())
            .map(|k| second_diffs_at(w, k).expect("torus nodes carry stencils").add(&anchor))
            .collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn node(&self, k: usize) -> &SecondDiffs {
        &self.data[k]
    }

    pub fn at(&self, y: Point) -> SecondDiffs {
        let n = self.grid.resolution();
        let nf = n as f64;
        let locate = |v: f64| {
            let t = v.rem_euclid(1.0) * nf;
            let i = t.floor();
            let f = t - i;
            let i = (i as usize) % n;
            // snap round-off so node positions return node data exactly
            if f < 1e-9 {
                (i, 0.0)
            } else if f > 1.0 - 1e-9 {
                ((i + 1) % n, 0.0)
            } else {
                (i, f)
            }
        };
        match self.grid.dim() {
            1 => {
                let (i, f) = locate(y[0]);
                if f == 0.0 {
                    self.data[i]
                } else {
                    self.data[i].lerp(&self.data[(i + 1) % n], f)
                }
            }
            _ => {
                let (i, fx) = locate(y[0]);
                let (j, fy) = locate(y[1]);
                let at = |i: usize, j: usize| self.data[i % n + n * (j % n)];
                if fx == 0.0 && fy == 0.0 {
                    return at(i, j);
                }
                let lower = at(i, j).lerp(&at(i + 1, j), fx);
                let upper = at(i, j + 1).lerp(&at(i + 1, j + 1), fx);
                lower.lerp(&upper, fy)
            }
        }
    }

    fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.data {
            for v in s.d {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

pub struct ScaledOperator {
    base: Arc<dyn Operator>,
    anchor: SymMatrix,
    mu: f64,
    field: Arc<CorrectorField>,
    id: String,
}

impl ScaledOperator {
    pub fn anchor(&self) -> &SymMatrix {
        &self.anchor
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn field(&self) -> &CorrectorField {
        &self.field
    }

    pub fn base(&self) -> &Arc<dyn Operator> {
        &self.base
    }

    /// `F(M + D^2 w(y), y)` in the base scheme.
    pub fn anchor_value(&self, y: Point) -> f64 {
        self.base.scheme_value(&self.field.at(y), y)
    }
}

/// Builds `F_{M,mu}` from a cell solution computed for `(base, M)`.
pub fn translate_scale(
    base: Arc<dyn Operator>,
    m: &SymMatrix,
    mu: f64,
    cell: &CellSolution,
) -> Result<ScaledOperator, OperatorError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(OperatorError::Argument(format!("scale mu = {mu} must be positive")));
    }
    if cell.operator_id != base.id() {
        return Err(OperatorError::Argument(format!(
            "cell was solved for operator {} but the base is {}",
            cell.operator_id,
            base.id()
        )));
    }
    if cell.anchor.dim() != m.dim() || cell.anchor.max_abs_diff(m) > 1e-14 {
        return Err(OperatorError::Argument(format!("cell anchor {} differs from requested {}", cell.anchor, m)));
    }
    let field = Arc::new(CorrectorField::from_cell(cell));
    let id = format!(
        "scaled[{}|M={:?}|mu={}|w={}]",
        base.id(),
        m.coords(),
        mu,
        field.fingerprint()
    );
    Ok(ScaledOperator { base, anchor: *m, mu, field, id })
}

impl Operator for ScaledOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn bounds(&self) -> (f64, f64) {
        self.base.bounds()
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn value(&self, n: &SymMatrix, y: Point) -> f64 {
        let k = self.field.at(y);
        let shifted = SecondDiffs::from_matrix(n).scale(self.mu).add(&k);
        (self.base.scheme_value(&shifted, y) - self.base.scheme_value(&k, y)) / self.mu
    }

    fn active(&self, s: &SecondDiffs, y: Point) -> ActiveLeaf {
        let k = self.field.at(y);
        let shifted = s.scale(self.mu).add(&k);
        let leaf = self.base.active(&shifted, y);
        let g0 = self.base.scheme_value(&k, y);
        let zero_offset = ActiveLeaf { weights: leaf.weights, offset: 0.0 };
        ActiveLeaf { weights: leaf.weights, offset: (zero_offset.value(&k) + leaf.offset - g0) / self.mu }
    }

    fn max_frequency(&self) -> u32 {
        self.base.max_frequency()
    }

    fn audit_monotone(&self) -> Result<(), OperatorError> {
        self.base.audit_monotone()
    }
}
