//! Tabulated effective operators and correctors.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{CellCache, CellOptions, CellSolution};
use super::CellError;
use crate::grid::Point;
use crate::matrix::SymMatrix;
use crate::operator::{ActiveLeaf, Operator};
use crate::stencil::SecondDiffs;

/// Number of matrix coordinates: `(m)` in 1-d, `(m11, m22, m12)` in 2-d.
pub fn coordinate_count(dim: usize) -> usize {
    if dim == 1 {
        1
    } else {
        3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl Axis {
    pub fn count(&self) -> usize {
        ((self.upper - self.lower) / self.step).round() as usize + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.step
    }
}

/// Rectangular lattice in matrix coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGrid {
    pub dim: usize,
    pub axes: Vec<Axis>,
}

impl MatrixGrid {
    pub fn new(dim: usize, axes: Vec<Axis>) -> Result<Self, CellError> {
        if axes.len() != coordinate_count(dim) {
            return Err(CellError::Argument(format!("{}-d matrix grid needs {} axes", dim, coordinate_count(dim))));
        }
        for a in &axes {
            if !(a.step > 0.0 && a.upper >= a.lower && a.lower.is_finite() && a.upper.is_finite()) {
                return Err(CellError::Argument(format!("invalid axis {a:?}")));
            }
        }
        Ok(Self { dim, axes })
    }

    /// Every coordinate on `[lower, upper]` with the same step.
    pub fn uniform(dim: usize, lower: f64, upper: f64, step: f64) -> Result<Self, CellError> {
        Self::new(dim, vec![Axis { lower, upper, step }; coordinate_count(dim)])
    }

    /// Range `[-4, 4]` with step 0.5.
    pub fn default_for(dim: usize) -> Self {
        Self::uniform(dim, -4.0, 4.0, 0.5).expect("valid default grid")
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates, first axis slowest.
    pub fn coords(&self, mut k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (a, axis) in self.axes.iter().enumerate().rev() {
            let c = axis.count();
            out[a] = axis.node(k % c);
            k /= c;
        }
        out
    }

    pub fn nodes(&self) -> Vec<SymMatrix> {
        (0..self.len()).map(|k| SymMatrix::from_coords(self.dim, &self.coords(k))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub coords: Vec<f64>,
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTable {
    pub spec_id: String,
    pub grid: MatrixGrid,
    pub options: CellOptions,
    pub entries: Vec<TableEntry>,
}

impl EffectiveTable {
    fn coordinate_names(&self) -> &'static [&'static str] {
        if self.grid.dim == 1 {
            &["m"]
        } else {
            &["m11", "m22", "m12"]
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CellError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.coordinate_names().to_vec();
        header.extend(["value", "residual"]);
        w.write_record(&header).map_err(|e| CellError::Io(e.to_string()))?;
        for e in &self.entries {
            let mut row: Vec<String> = e.coords.iter().map(|c| format!("{c}")).collect();
            row.push(format!("{:.15e}", e.value));
            row.push(format!("{:.3e}", e.residual));
            w.write_record(&row).map_err(|e| CellError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CellError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, CellError> {
        serde_json::from_reader(reader).map_err(|e| CellError::Io(e.to_string()))
    }

    /// Exact table value at a node, if `m` is one.
    pub fn lookup(&self, m: &SymMatrix) -> Option<f64> {
        let c = m.coords();
        self.entries
            .iter()
            .find(|e| e.coords.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-12))
            .map(|e| e.value)
    }

    /// Multilinear interpolation between table nodes. Approximate: the
    /// interpolant is not itself an effective operator.
    pub fn interpolate(&self, m: &SymMatrix) -> Result<f64, CellError> {
        let c = m.coords();
        let axes = &self.grid.axes;
        let mut base = Vec::with_capacity(axes.len());
        let mut frac = Vec::with_capacity(axes.len());
        for (x, a) in c.iter().zip(axes) {
            let t = (x - a.lower) / a.step;
            let last = a.count() - 1;
            if t < -1e-9 || t > last as f64 + 1e-9 {
                return Err(CellError::Extrapolation { coords: c.clone() });
            }
            let i = (t.floor().max(0.0) as usize).min(last.saturating_sub(1));
            base.push(i);
            frac.push(if last == 0 { 0.0 } else { (t - i as f64).clamp(0.0, 1.0) });
        }
        let mut total = 0.0;
        for corner in 0..(1usize << axes.len()) {
            let mut weight = 1.0;
            let mut k = 0;
            for (a, axis) in axes.iter().enumerate() {
                let bit = (corner >> a) & 1;
                weight *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                let idx = (base[a] + bit).min(axis.count() - 1);
                k = k * axis.count() + idx;
            }
            if weight != 0.0 {
                total += weight * self.entries[k].value;
            }
        }
        Ok(total)
    }
}

/// One effective value per grid node, computed in parallel; output order
/// follows [`MatrixGrid::coords`].
pub fn tabulate_effective(
    op: &dyn Operator,
    grid: &MatrixGrid,
    opts: &CellOptions,
    cache: &CellCache,
) -> Result<EffectiveTable, CellError> {
    if grid.dim != op.dim() {
        return Err(CellError::DimMismatch { operator: op.dim(), anchor: grid.dim });
    }
    let results: Vec<Result<TableEntry, CellError>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let coords = grid.coords(k);
            let m = SymMatrix::from_coords(grid.dim, &coords);
            let cell = cache.get_or_solve(op, &m, opts)?;
            Ok(TableEntry { coords, value: cell.effective_value, residual: cell.residual })
        })
        .collect();
    let mut entries = Vec::with_capacity(results.len());
    let mut failure = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => entries.push(e),
            Err(e) if failure.is_none() => failure = Some((k, e)),
            Err(_) => {}
        }
    }
    let table = EffectiveTable { spec_id: op.id(), grid: grid.clone(), options: *opts, entries };
    match failure {
        None => Ok(table),
        Some((k, source)) => Err(CellError::TableAborted {
            coords: grid.coords(k),
            partial: Box::new(table),
            source: Box::new(source),
        }),
    }
}

/// Freudenthal simplex containing `x` (in lattice units): base vertex and the
/// axis order of increasing vertices, plus the fractional parts.
fn freudenthal(x: &[f64]) -> (Vec<i64>, Vec<usize>, Vec<f64>) {
    let base: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
    let frac: Vec<f64> = x.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    (base, order, frac)
}

fn lattice_key(v: &[i64]) -> [i64; 3] {
    let mut k = [0; 3];
    k[..v.len()].copy_from_slice(v);
    k
}

/// Barycentric weights and vertices of the Freudenthal simplex around `x`.
fn simplex_weights(x: &[f64]) -> Vec<(f64, Vec<i64>)> {
    let (base, order, frac) = freudenthal(x);
    let d = x.len();
    let mut out = Vec::with_capacity(d + 1);
    let mut vertex = base;
    let mut prev = 1.0;
    for (k, &axis) in order.iter().enumerate() {
        let f = frac[axis];
        out.push((prev - f, vertex.clone()));
        prev = f;
        vertex[axis] += 1;
        if k == d - 1 {
            out.push((f, vertex.clone()));
        }
    }
    out
}

/// `F_bar` as a lazily tabulated operator: piecewise linear on the
/// Freudenthal triangulation of a lattice with spacing `step`.
///
/// Vertex values come from cell solves with `cell_opts`. The active leaf of
/// the scheme carries the simplex gradient; off-diagonal gradients beyond the
/// monotone range are counted.
pub struct EffectiveOperator {
    base: Arc<dyn Operator>,
    cell_opts: CellOptions,
    step: f64,
    vertices: DashMap<[i64; 3], f64>,
    clips: AtomicUsize,
    failures: AtomicUsize,
    id: String,
}

impl EffectiveOperator {
    pub fn new(base: Arc<dyn Operator>, cell_opts: CellOptions, step: f64) -> Result<Self, CellError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CellError::Argument(format!("lattice step {step} must be positive")));
        }
        let id = format!("effective[{}|res={}|step={}]", base.id(), cell_opts.resolution, step);
        Ok(Self {
            base,
            cell_opts,
            step,
            vertices: DashMap::new(),
            clips: AtomicUsize::new(0),
            failures: AtomicUsize::new(0),
            id,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn cell_options(&self) -> &CellOptions {
        &self.cell_opts
    }

    /// Number of cell solves performed so far.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn clip_count(&self) -> usize {
        self.clips.load(Ordering::Relaxed)
    }

    pub fn failure_count(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    fn vertex_value(&self, v: &[i64]) -> f64 {
        let key = lattice_key(v);
        if let Some(hit) = self.vertices.get(&key) {
            return *hit;
        }
        let coords: Vec<f64> = v.iter().map(|&i| i as f64 * self.step).collect();
        let m = SymMatrix::from_coords(self.base.dim(), &coords);
        let value = match super::solve::solve_cell(self.base.as_ref(), &m, &self.cell_opts) {
            Ok(cell) => cell.effective_value,
            Err(_) => {
                self.failures.fetch_add(1, Ordering::Relaxed);
                f64::NAN
            }
        };
        self.vertices.insert(key, value);
        value
    }

    /// Solves the vertices of every simplex touched by `coords` in parallel.
    pub fn prefetch(&self, points: &[Vec<f64>]) {
        let mut wanted: Vec<[i64; 3]> = Vec::new();
        for c in points {
            let x: Vec<f64> = c.iter().map(|v| v / self.step).collect();
            for (_, v) in simplex_weights(&x) {
                let key = lattice_key(&v);
                if !self.vertices.contains_key(&key) {
                    wanted.push(key);
                }
            }
        }
        wanted.sort_unstable();
        wanted.dedup();
        let d = coordinate_count(self.base.dim());
        wanted.par_iter().for_each(|k| {
            self.vertex_value(&k[..d]);
        });
    }

    /// Value and coordinate gradient of the interpolant.
    fn interpolate(&self, coords: &[f64]) -> (f64, Vec<f64>) {
        let x: Vec<f64> = coords.iter().map(|v| v / self.step).collect();
        let (base, order, frac) = freudenthal(&x);
        let mut vertex = base;
        let mut value = self.vertex_value(&vertex);
        let mut grad = vec![0.0; x.len()];
        for &axis in &order {
            let prev = self.vertex_value(&vertex);
            vertex[axis] += 1;
            let next = self.vertex_value(&vertex);
            let slope = next - prev;
            grad[axis] = slope / self.step;
            value += frac[axis] * slope;
        }
        (value, grad)
    }

    /// Scheme leaf `F_bar(H) + c ((d_pp + d_pm) / 2 - d_11 - d_22)` with a
    /// fixed `c = lambda`, so the scheme is continuous across simplices. A
    /// simplex with `|g12| > c` yields a negative diagonal weight; those are
    /// counted.
    fn leaf(&self, coords: &[f64]) -> ActiveLeaf {
        let (value, grad) = self.interpolate(coords);
        let offset = value - grad.iter().zip(coords).map(|(g, c)| g * c).sum::<f64>();
        if grad.len() == 1 {
            return ActiveLeaf { weights: [grad[0], 0.0, 0.0, 0.0], offset };
        }
        let (g11, g22, g12) = (grad[0], grad[1], 0.5 * grad[2]);
        let (c, _) = self.base.bounds();
        if g12.abs() > c || g11.min(g22) < c {
            self.clips.fetch_add(1, Ordering::Relaxed);
        }
        ActiveLeaf { weights: [g11 - c, g22 - c, 0.5 * (c + g12), 0.5 * (c - g12)], offset }
    }
}

impl Operator for EffectiveOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn bounds(&self) -> (f64, f64) {
        self.base.bounds()
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn value(&self, m: &SymMatrix, _y: Point) -> f64 {
        self.interpolate(&m.coords()).0
    }

    fn active(&self, s: &SecondDiffs, _y: Point) -> ActiveLeaf {
        self.leaf(&s.hessian().coords())
    }
}

/// Correctors `w_F(M, y)` on a bounded lattice of anchors, interpolated in `M`
/// on the Freudenthal triangulation and periodically in `y`.
pub struct CorrectorTable {
    base: Arc<dyn Operator>,
    cell_opts: CellOptions,
    step: f64,
    range: (f64, f64),
    cells: DashMap<[i64; 3], Arc<CellSolution>>,
}

impl CorrectorTable {
    /// Anchors with every coordinate in `range` are admissible.
    pub fn new(base: Arc<dyn Operator>, cell_opts: CellOptions, step: f64, range: (f64, f64)) -> Result<Self, CellError> {
        if !(step > 0.0 && range.1 > range.0) {
            return Err(CellError::Argument(format!("invalid corrector table step {step} or range {range:?}")));
        }
        Ok(Self { base, cell_opts, step, range, cells: DashMap::new() })
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    fn cell(&self, v: &[i64]) -> Result<Arc<CellSolution>, CellError> {
        let key = lattice_key(v);
        if let Some(hit) = self.cells.get(&key) {
            return Ok(hit.clone());
        }
        let coords: Vec<f64> = v.iter().map(|&i| i as f64 * self.step).collect();
        let m = SymMatrix::from_coords(self.base.dim(), &coords);
        let cell = Arc::new(super::solve::solve_cell(self.base.as_ref(), &m, &self.cell_opts)?);
        self.cells.insert(key, cell.clone());
        Ok(cell)
    }

    /// `w_F(M, y)`; errors outside the tabulated range.
    pub fn eval(&self, m: &SymMatrix, y: Point) -> Result<f64, CellError> {
        let coords = m.coords();
        if coords.iter().any(|c| *c < self.range.0 - 1e-12 || *c > self.range.1 + 1e-12) {
            return Err(CellError::Extrapolation { coords });
        }
        let x: Vec<f64> = coords.iter().map(|v| v / self.step).collect();
        let mut total = 0.0;
        for (weight, v) in simplex_weights(&x) {
            if weight.abs() < 1e-15 {
                continue;
            }
            total += weight * self.cell(&v)?.corrector.interpolate_periodic(y);
        }
        Ok(total)
    }
}
