use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::poisson::PeriodicPoisson;
use super::CellError;
use crate::grid::{Grid, GridFunction, TorusGrid, MIN_RESOLUTION};
use crate::matrix::SymMatrix;
use crate::operator::Operator;
use crate::solver::engine::{Engine, Scheme, SolverOptions, YMap};
use crate::stencil::SecondDiffs;

/// Points per coefficient period required on the cell torus.
pub const POINTS_PER_FREQUENCY: usize = 8;

pub const DEFAULT_CELL_TOL: f64 = 1e-6;

/// Discounts `2^-3, ..., 2^-12` of the vanishing-discount method.
pub const DISCOUNT_EXPONENTS: std::ops::RangeInclusive<i32> = 3..=12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellMethod {
    VanishingDiscount,
    MeanCorrection,
}

impl std::str::FromStr for CellMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanishing-discount" => Ok(Self::VanishingDiscount),
            "mean-correction" => Ok(Self::MeanCorrection),
            other => Err(format!("unknown cell method `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    pub resolution: usize,
    pub method: CellMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl CellOptions {
    pub fn new(resolution: usize) -> Self {
        Self { resolution, method: CellMethod::MeanCorrection, tol: DEFAULT_CELL_TOL, max_iter: 5000 }
    }

    /// 256 nodes in one dimension, 128 per axis in two.
    pub fn default_for(dim: usize) -> Self {
        Self::new(if dim == 1 { 256 } else { 128 })
    }

    pub fn with_method(mut self, method: CellMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscountStep {
    pub delta: f64,
    /// `delta * w^delta` at the origin node.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSolution {
    pub anchor: SymMatrix,
    pub operator_id: String,
    pub effective_value: f64,
    /// Normalized corrector, zero at the origin node.
    pub corrector: GridFunction,
    /// Sup over torus nodes of `|G(M + D_h^2 w, y) - effective_value|`.
    pub residual: f64,
    pub method: CellMethod,
    pub trail: Vec<DiscountStep>,
    pub extrapolated: Option<f64>,
    pub iterations: usize,
}

impl CellSolution {
    pub fn resolution(&self) -> usize {
        self.corrector.grid().shape()[0]
    }
}

fn cell_engine<'a>(op: &'a dyn Operator, grid: TorusGrid, m: &SymMatrix, delta: f64, rhs: f64, ergodic: bool) -> Engine<'a> {
    Engine::new(Scheme {
        op,
        grid: Grid::Torus(grid),
        ymap: YMap::Scaled(1.0),
        anchor: SecondDiffs::from_matrix(m),
        delta,
        rhs: vec![rhs; grid.len()],
        ergodic,
    })
}

fn check_inputs(op: &dyn Operator, m: &SymMatrix, opts: &CellOptions) -> Result<TorusGrid, CellError> {
    if op.dim() != m.dim() {
        return Err(CellError::DimMismatch { operator: op.dim(), anchor: m.dim() });
    }
    if !m.is_finite() {
        return Err(CellError::Argument(format!("anchor {m} is not finite")));
    }
    if !(opts.tol > 0.0) {
        return Err(CellError::Argument(format!("tolerance {} must be positive", opts.tol)));
    }
    let needed = (POINTS_PER_FREQUENCY * op.max_frequency() as usize).max(MIN_RESOLUTION);
    if opts.resolution < needed {
        return Err(CellError::Underresolved { resolution: opts.resolution, needed });
    }
    op.audit_monotone()?;
    Ok(TorusGrid::new(op.dim(), opts.resolution)?)
}

/// Solves the cell problem `G(M + D_h^2 w, y) = c` on the periodic torus.
pub fn solve_cell(op: &dyn Operator, m: &SymMatrix, opts: &CellOptions) -> Result<CellSolution, CellError> {
    let grid = check_inputs(op, m, opts)?;
    match opts.method {
        CellMethod::MeanCorrection => mean_correction(op, grid, m, opts),
        CellMethod::VanishingDiscount => vanishing_discount(op, grid, m, opts),
    }
}

fn normalized(grid: TorusGrid, mut w: Vec<f64>) -> Result<GridFunction, CellError> {
    let origin = w[0];
    for v in w.iter_mut() {
        *v -= origin;
    }
    Ok(GridFunction::new(grid, w)?)
}

/// Laplacian-preconditioned iteration `w <- w - omega (theta Lap_h)^-1 (r - mean r)`.
fn mean_correction(op: &dyn Operator, grid: TorusGrid, m: &SymMatrix, opts: &CellOptions) -> Result<CellSolution, CellError> {
    let engine = cell_engine(op, grid, m, 0.0, 0.0, false);
    let poisson = PeriodicPoisson::new(grid.dim(), grid.resolution());
    let (lambda, big_lambda) = op.bounds();
    let theta = 0.5 * (lambda + big_lambda / (grid.dim() as f64).sqrt());
    let stats = |r: &[f64]| {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let dev = r.iter().fold(0.0_f64, |acc, v| acc.max((v - mean).abs()));
        (mean, dev)
    };
    let mut w = vec![0.0; grid.len()];
    let mut r = engine.residuals(&w, 0.0);
    let (mut mean, mut dev) = stats(&r);
    let mut omega = 1.0;
    let mut iterations = 0;
    while dev > opts.tol {
        if iterations >= opts.max_iter || omega < 1e-6 || !dev.is_finite() {
            return Err(CellError::NonConvergence { residual: dev, iterations });
        }
        iterations += 1;
        let v = poisson.solve(&r);
        let trial: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - omega * b / theta).collect();
        let r_trial = engine.residuals(&trial, 0.0);
        let (mean_t, dev_t) = stats(&r_trial);
        if dev_t < dev {
            w = trial;
            r = r_trial;
            mean = mean_t;
            dev = dev_t;
            omega = (omega * 1.25).min(1.0);
        } else {
            omega *= 0.5;
        }
    }
    Ok(CellSolution {
        anchor: *m,
        operator_id: op.id(),
        effective_value: mean,
        corrector: normalized(grid, w)?,
        residual: dev,
        method: CellMethod::MeanCorrection,
        trail: Vec::new(),
        extrapolated: None,
        iterations,
    })
}

/// Richardson extrapolation to `delta = 0` of the last three entries of a
/// halving trail, eliminating the `O(delta)` and `O(delta^2)` terms.
pub fn richardson(trail: &[DiscountStep]) -> Option<f64> {
    match trail {
        [.., a, b, c] => {
            let r1 = 2.0 * b.value - a.value;
            let r2 = 2.0 * c.value - b.value;
            Some((4.0 * r2 - r1) / 3.0)
        }
        [.., a, b] => Some(2.0 * b.value - a.value),
        [a] => Some(a.value),
        [] => None,
    }
}

fn vanishing_discount(op: &dyn Operator, grid: TorusGrid, m: &SymMatrix, opts: &CellOptions) -> Result<CellSolution, CellError> {
    let solver_opts = SolverOptions { tol: opts.tol, max_iter: 200, ..SolverOptions::default() };
    let mut trail = Vec::new();
    // w^delta = shift + v keeps v of order one while delta w^delta -> c
    let mut v = vec![0.0; grid.len()];
    let mut estimate = op.scheme_value(&SecondDiffs::from_matrix(m), [0.0, 0.0]);
    let mut iterations = 0;
    for e in DISCOUNT_EXPONENTS {
        let delta = 2f64.powi(-e);
        let shift = estimate / delta;
        let mut engine = cell_engine(op, grid, m, delta, delta * shift, false);
        let out = engine.solve(v, 0.0, &solver_opts)?;
        iterations += out.report.iterations;
        let origin = out.values[0];
        let value = delta * (shift + origin);
        trail.push(DiscountStep { delta, value });
        estimate = value;
        v = out.values.iter().map(|x| x - origin).collect();
    }
    let extrapolated = richardson(&trail);
    let c0 = extrapolated.unwrap_or(estimate);
    let mut engine = cell_engine(op, grid, m, 0.0, 0.0, true);
    let out = engine.solve(v, c0, &solver_opts)?;
    iterations += out.report.iterations;
    let corrector = normalized(grid, out.values)?;
    let residual = engine.sup_residual(corrector.values(), out.constant);
    Ok(CellSolution {
        anchor: *m,
        operator_id: op.id(),
        effective_value: out.constant,
        corrector,
        residual,
        method: CellMethod::VanishingDiscount,
        trail,
        extrapolated,
        iterations,
    })
}

/// Solves with both methods and fails if the effective values differ by
/// more than `10 tol`.
pub fn cross_check(
    op: &dyn Operator,
    m: &SymMatrix,
    opts: &CellOptions,
) -> Result<(CellSolution, CellSolution), CellError> {
    let vd = solve_cell(op, m, &opts.with_method(CellMethod::VanishingDiscount))?;
    let mc = solve_cell(op, m, &opts.with_method(CellMethod::MeanCorrection))?;
    let diff = (vd.effective_value - mc.effective_value).abs();
    if diff > 10.0 * opts.tol {
        return Err(CellError::Disagreement {
            vanishing: vd.effective_value,
            mean: mc.effective_value,
            tol: opts.tol,
        });
    }
    Ok((vd, mc))
}

/// Scheme residual of a stored cell solution, recomputed from scratch.
pub fn cell_residual(op: &dyn Operator, cell: &CellSolution) -> Result<f64, CellError> {
    let grid = match cell.corrector.grid() {
        Grid::Torus(g) => *g,
        Grid::Box(_) => return Err(CellError::Argument("cell corrector must live on a torus".into())),
    };
    let engine = cell_engine(op, grid, &cell.anchor, 0.0, 0.0, false);
    Ok(engine.sup_residual(cell.corrector.values(), cell.effective_value))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CellKey {
    operator: String,
    anchor: [u64; 3],
    resolution: usize,
    method: CellMethod,
    tol: u64,
}

impl CellKey {
    fn new(op: &dyn Operator, m: &SymMatrix, opts: &CellOptions) -> Self {
        let c = m.coords();
        let mut anchor = [0u64; 3];
        for (slot, v) in anchor.iter_mut().zip(c) {
            *slot = (v + 0.0).to_bits();
        }
        Self { operator: op.id(), anchor, resolution: opts.resolution, method: opts.method, tol: opts.tol.to_bits() }
    }

    fn file_name(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("{self:?}").as_bytes());
        let digest: String = hasher.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect();
        format!("cell-{digest}.json")
    }
}

/// Concurrent cache of cell solutions, optionally persisted as JSON files.
#[derive(Default)]
pub struct CellCache {
    map: DashMap<CellKey, Arc<CellSolution>>,
    dir: Option<PathBuf>,
}

impl CellCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Persists solutions under `dir`, created on first write.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self { map: DashMap::new(), dir: Some(dir.into()) }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn clear(&self) {
        self.map.clear();
    }

    pub fn get_or_solve(&self, op: &dyn Operator, m: &SymMatrix, opts: &CellOptions) -> Result<Arc<CellSolution>, CellError> {
        let key = CellKey::new(op, m, opts);
        if let Some(hit) = self.map.get(&key) {
            return Ok(hit.clone());
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(key.file_name());
            if let Ok(text) = fs::read_to_string(&path) {
                if let Ok(cell) = serde_json::from_str::<CellSolution>(&text) {
                    let cell = Arc::new(cell);
                    self.map.insert(key, cell.clone());
                    return Ok(cell);
                }
            }
        }
        let cell = Arc::new(solve_cell(op, m, opts)?);
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir).map_err(|e| CellError::Io(e.to_string()))?;
            let text = serde_json::to_string(cell.as_ref()).map_err(|e| CellError::Io(e.to_string()))?;
            fs::write(dir.join(key.file_name()), text).map_err(|e| CellError::Io(e.to_string()))?;
        }
        self.map.insert(key, cell.clone());
        Ok(cell)
    }
}

/// Process-wide in-memory cache used by [`effective_value`].
pub fn global_cache() -> &'static CellCache {
    static CACHE: OnceLock<CellCache> = OnceLock::new();
    CACHE.get_or_init(CellCache::new)
}

/// `F_bar(M)` through the global cache.
pub fn effective_value(op: &dyn Operator, m: &SymMatrix, opts: &CellOptions) -> Result<f64, CellError> {
    Ok(global_cache().get_or_solve(op, m, opts)?.effective_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::builtin;

    #[test]
    fn richardson_removes_linear_and_quadratic_terms() {
        let c = 1.5;
        let trail: Vec<DiscountStep> = (3..=6)
            .map(|e| {
                let delta = 2f64.powi(-e);
                DiscountStep { delta, value: c + 0.7 * delta - 2.0 * delta * delta }
            })
            .collect();
        assert!((richardson(&trail).unwrap() - c).abs() < 1e-14);
        assert_eq!(richardson(&[]), None);
    }

    #[test]
    fn cache_returns_the_stored_solution() {
        let spec = builtin("cos1d").unwrap();
        let cache = CellCache::new();
        let opts = CellOptions::new(64);
        let a = cache.get_or_solve(&spec, &SymMatrix::scalar(2.0), &opts).unwrap();
        let b = cache.get_or_solve(&spec, &SymMatrix::scalar(2.0), &opts).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        cache.clear();
        assert!(cache.is_empty());
    }

    #[test]
    fn coarse_cells_and_mismatched_anchors_are_rejected() {
        let spec = builtin("separable2d").unwrap();
        assert!(matches!(
            solve_cell(&spec, &SymMatrix::identity(2), &CellOptions::new(4)),
            Err(CellError::Underresolved { .. })
        ));
        assert!(matches!(
            solve_cell(&spec, &SymMatrix::scalar(1.0), &CellOptions::new(16)),
            Err(CellError::DimMismatch { .. })
        ));
        assert!("newton".parse::<CellMethod>().is_err());
    }

    #[test]
    fn stored_residual_matches_a_fresh_evaluation() {
        let spec = builtin("mincossin1d").unwrap();
        let cell = solve_cell(&spec, &SymMatrix::scalar(-1.5), &CellOptions::new(64).with_tol(1e-10)).unwrap();
        assert!((cell_residual(&spec, &cell).unwrap() - cell.residual).abs() < 1e-12);
    }
}
