//! Uniform grids on the unit torus and on boxes, grid functions, discrete
//! Hessians and the norms and seminorms the diagnostics are built from.
//!
//! Node `k` of a 2-D grid has index coordinates `(k % n0, k / n0)`; axis 0
//! varies fastest. Torus grids cover `[0,1)^dim` with `resolution` points per
//! axis; box grids carry `intervals + 1` nodes per axis including the boundary.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SymMatrix;
use crate::stencil::SecondDiffs;

pub type Point = [f64; 2];

/// Smallest admissible points per period axis.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("dimension {0} not supported (expected 1 or 2)")]
    UnsupportedDim(usize),
    #[error("resolution {0} below the minimum of {MIN_RESOLUTION}")]
    InvalidResolution(usize),
    #[error("box axes must share one spacing for the diagonal stencils (got {0} and {1})")]
    NonUniformSpacing(f64, f64),
    #[error("empty box axis: lower {lower} >= upper {upper}")]
    EmptyAxis { lower: f64, upper: f64 },
    #[error("node {node} has no full central-difference neighborhood")]
    StencilUnavailable { node: usize },
    #[error("empty annulus: exclusion {exclusion} >= radius {radius}")]
    EmptyAnnulus { exclusion: f64, radius: f64 },
    #[error("radius {radius} exceeds the distance {available} from the center to the boundary")]
    RadiusExceedsDomain { radius: f64, available: f64 },
    #[error("exponent p = {0} must be >= 1")]
    InvalidExponent(f64),
    #[error("holder exponent {0} must lie in (0, 1]")]
    InvalidHolderExponent(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("region selects no nodes")]
    EmptyRegion,
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("malformed grid data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    resolution: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::UnsupportedDim(dim));
        }
        if resolution < MIN_RESOLUTION {
            return Err(GridError::InvalidResolution(resolution));
        }
        Ok(Self { dim, resolution })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    dim: usize,
    lower: Point,
    upper: Point,
    intervals: [usize; 2],
}

impl BoxGrid {
    pub fn new(dim: usize, lower: Point, upper: Point, intervals: [usize; 2]) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::UnsupportedDim(dim));
        }
        for axis in 0..dim {
            if lower[axis] >= upper[axis] {
                return Err(GridError::EmptyAxis { lower: lower[axis], upper: upper[axis] });
            }
            if intervals[axis] < 2 {
                return Err(GridError::InvalidResolution(intervals[axis]));
            }
        }
        let mut grid = Self { dim, lower, upper, intervals };
        if dim == 1 {
            grid.lower[1] = 0.0;
            grid.upper[1] = 0.0;
            grid.intervals[1] = 0;
        } else {
            let h0 = (upper[0] - lower[0]) / intervals[0] as f64;
            let h1 = (upper[1] - lower[1]) / intervals[1] as f64;
            if (h0 - h1).abs() > 1e-12 * h0.max(h1) {
                return Err(GridError::NonUniformSpacing(h0, h1));
            }
        }
        Ok(grid)
    }

    /// The unit interval or unit square with `intervals` cells per axis.
    pub fn unit(dim: usize, intervals: usize) -> Result<Self, GridError> {
        Self::new(dim, [0.0, 0.0], [1.0, 1.0], [intervals, intervals])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> Point {
        self.lower
    }

    pub fn upper(&self) -> Point {
        self.upper
    }

    pub fn intervals(&self) -> [usize; 2] {
        self.intervals
    }

    pub fn spacing(&self) -> f64 {
        (self.upper[0] - self.lower[0]) / self.intervals[0] as f64
    }

    pub fn nodes_per_axis(&self) -> [usize; 2] {
        match self.dim {
            1 => [self.intervals[0] + 1, 1],
            _ => [self.intervals[0] + 1, self.intervals[1] + 1],
        }
    }

    pub fn len(&self) -> usize {
        let n = self.nodes_per_axis();
        n[0] * n[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A grid is either periodic (the unit torus) or a box with Dirichlet nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Torus(TorusGrid),
    Box(BoxGrid),
}

impl From<TorusGrid> for Grid {
    fn from(g: TorusGrid) -> Self {
        Grid::Torus(g)
    }
}

impl From<BoxGrid> for Grid {
    fn from(g: BoxGrid) -> Self {
        Grid::Box(g)
    }
}

impl Grid {
    pub fn dim(&self) -> usize {
        match self {
            Grid::Torus(g) => g.dim,
            Grid::Box(g) => g.dim,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Torus(g) => g.len(),
            Grid::Box(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Torus(g) => g.spacing(),
            Grid::Box(g) => g.spacing(),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Grid::Torus(_))
    }

    /// Nodes per axis (1 for the unused axis in 1-D).
    pub fn shape(&self) -> [usize; 2] {
        match self {
            Grid::Torus(g) => match g.dim {
                1 => [g.resolution, 1],
                _ => [g.resolution, g.resolution],
            },
            Grid::Box(g) => g.nodes_per_axis(),
        }
    }

    pub fn coords(&self, k: usize) -> [usize; 2] {
        let n0 = self.shape()[0];
        [k % n0, k / n0]
    }

    pub fn index(&self, c: [usize; 2]) -> usize {
        c[0] + self.shape()[0] * c[1]
    }

    pub fn point(&self, k: usize) -> Point {
        let c = self.coords(k);
        let h = self.spacing();
        match self {
            Grid::Torus(g) => match g.dim {
                1 => [c[0] as f64 * h, 0.0],
                _ => [c[0] as f64 * h, c[1] as f64 * h],
            },
            Grid::Box(g) => match g.dim {
                1 => [g.lower[0] + c[0] as f64 * h, 0.0],
                _ => [g.lower[0] + c[0] as f64 * h, g.lower[1] + c[1] as f64 * h],
            },
        }
    }

    /// Neighbor at an integer offset; wraps on the torus, `None` outside a box.
    pub fn neighbor(&self, k: usize, offset: [i64; 2]) -> Option<usize> {
        let shape = self.shape();
        let c = self.coords(k);
        let mut out = [0usize; 2];
        for axis in 0..2 {
            let n = shape[axis] as i64;
            let v = c[axis] as i64 + offset[axis];
            out[axis] = match self {
                Grid::Torus(_) => v.rem_euclid(n) as usize,
                Grid::Box(_) => {
                    if v < 0 || v >= n {
                        return None;
                    }
                    v as usize
                }
            };
        }
        Some(self.index(out))
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match self {
            Grid::Torus(_) => false,
            Grid::Box(g) => {
                let c = self.coords(k);
                (0..g.dim).any(|a| c[a] == 0 || c[a] == g.intervals[a])
            }
        }
    }

    /// Whether the node carries the full 3- (1-D) or 9-point (2-D) stencil.
    pub fn has_stencil(&self, k: usize) -> bool {
        !self.is_boundary(k)
    }

    /// Displacement `to - from`, using the nearest periodic image on the torus.
    pub fn displacement(&self, from: Point, to: Point) -> Point {
        let mut d = [to[0] - from[0], to[1] - from[1]];
        if self.is_periodic() {
            for v in d.iter_mut() {
                *v -= v.round();
            }
        }
        if self.dim() == 1 {
            d[1] = 0.0;
        }
        d
    }

    pub fn distance(&self, from: Point, to: Point) -> f64 {
        let d = self.displacement(from, to);
        d[0].hypot(d[1])
    }

    /// Distance from a point to the box boundary (infinite on the torus).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        match self {
            Grid::Torus(_) => f64::INFINITY,
            Grid::Box(g) => (0..g.dim)
                .map(|a| (p[a] - g.lower[a]).min(g.upper[a] - p[a]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Node nearest to a point (clamped into a box).
    pub fn nearest_node(&self, p: Point) -> usize {
        let shape = self.shape();
        let h = self.spacing();
        let mut c = [0usize; 2];
        for axis in 0..self.dim() {
            let (origin, n) = match self {
                Grid::Torus(_) => (0.0, shape[axis] as i64),
                Grid::Box(g) => (g.lower[axis], shape[axis] as i64),
            };
            let raw = ((p[axis] - origin) / h).round() as i64;
            c[axis] = match self {
                Grid::Torus(_) => raw.rem_euclid(n) as usize,
                Grid::Box(_) => raw.clamp(0, n - 1) as usize,
            };
        }
        self.index(c)
    }
}

/// Values attached to every node of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: impl Into<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        let grid = grid.into();
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_fn(grid: impl Into<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let grid = grid.into();
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(Point, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| f(self.grid.point(k), *v))
            .collect();
        Self { grid: self.grid, values }
    }

    /// Pointwise `self - other` on the same grid.
    pub fn difference(&self, other: &GridFunction) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Format("grids differ".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Periodic multilinear interpolation; only meaningful on torus grids.
    pub fn interpolate_periodic(&self, y: Point) -> f64 {
        let Grid::Torus(g) = self.grid else {
            return self.values[self.grid.nearest_node(y)];
        };
        let n = g.resolution as f64;
        let r = g.resolution as i64;
        match g.dim {
            1 => {
                let t = y[0].rem_euclid(1.0) * n;
                let i0 = t.floor();
                let f = t - i0;
                let i0 = (i0 as i64).rem_euclid(r) as usize;
                let i1 = (i0 + 1) % g.resolution;
                (1.0 - f) * self.values[i0] + f * self.values[i1]
            }
            _ => {
                let tx = y[0].rem_euclid(1.0) * n;
                let ty = y[1].rem_euclid(1.0) * n;
                let (fx, fy) = (tx - tx.floor(), ty - ty.floor());
                let i0 = (tx.floor() as i64).rem_euclid(r) as usize;
                let j0 = (ty.floor() as i64).rem_euclid(r) as usize;
                let i1 = (i0 + 1) % g.resolution;
                let j1 = (j0 + 1) % g.resolution;
                let at = |i: usize, j: usize| self.values[i + g.resolution * j];
                (1.0 - fx) * (1.0 - fy) * at(i0, j0)
                    + fx * (1.0 - fy) * at(i1, j0)
                    + (1.0 - fx) * fy * at(i0, j1)
                    + fx * fy * at(i1, j1)
            }
        }
    }

    /// Flat CSV: one row per node with its index coordinates and value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(writer);
        if self.grid.dim() == 1 {
            w.write_record(["i", "value"])?;
        } else {
            w.write_record(["i", "j", "value"])?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let c = self.grid.coords(k);
            if self.grid.dim() == 1 {
                w.write_record(&[c[0].to_string(), v.to_string()])?;
            } else {
                w.write_record(&[c[0].to_string(), c[1].to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`write_csv`](Self::write_csv) onto a known grid.
    pub fn read_csv<R: Read>(grid: impl Into<Grid>, reader: R) -> Result<Self, GridError> {
        let grid = grid.into();
        let mut values = vec![f64::NAN; grid.len()];
        let mut seen = 0usize;
        let mut r = csv::Reader::from_reader(reader);
        for record in r.records() {
            let record = record?;
            let parse = |i: usize| -> Result<&str, GridError> {
                record.get(i).ok_or_else(|| GridError::Format(format!("short record {record:?}")))
            };
            let (c, v) = if grid.dim() == 1 {
                ([parse(0)?.parse::<usize>().map_err(fmt_err)?, 0], parse(1)?)
            } else {
                (
                    [parse(0)?.parse::<usize>().map_err(fmt_err)?, parse(1)?.parse::<usize>().map_err(fmt_err)?],
                    parse(2)?,
                )
            };
            let shape = grid.shape();
            if c[0] >= shape[0] || c[1] >= shape[1] {
                return Err(GridError::Format(format!("index {c:?} outside grid {shape:?}")));
            }
            values[grid.index(c)] = v.parse::<f64>().map_err(fmt_err)?;
            seen += 1;
        }
        if seen != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: seen });
        }
        Self::new(grid, values)
    }

    /// Binary dump: 16-byte header, box bounds (box grids only), then values.
    ///
    /// Header layout (little endian): bytes 0..4 magic `OSCG`, 4..6 format
    /// version (1), 6 grid kind (0 torus, 1 box), 7 dimension, 8..12 resolution
    /// of axis 0, 12..16 resolution of axis 1 (0 in 1-D). Resolutions count
    /// points per period on the torus and intervals on a box.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        let dim = self.grid.dim();
        let (kind, res) = match &self.grid {
            Grid::Torus(g) => (0u8, [g.resolution as u32, if dim == 2 { g.resolution as u32 } else { 0 }]),
            Grid::Box(g) => (1u8, [g.intervals[0] as u32, g.intervals[1] as u32]),
        };
        let mut header = [0u8; 16];
        header[0..4].copy_from_slice(BINARY_MAGIC);
        header[4..6].copy_from_slice(&BINARY_VERSION.to_le_bytes());
        header[6] = kind;
        header[7] = dim as u8;
        header[8..12].copy_from_slice(&res[0].to_le_bytes());
        header[12..16].copy_from_slice(&res[1].to_le_bytes());
        w.write_all(&header)?;
        if let Grid::Box(g) = &self.grid {
            for axis in 0..dim {
                w.write_all(&g.lower[axis].to_le_bytes())?;
                w.write_all(&g.upper[axis].to_le_bytes())?;
            }
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != BINARY_MAGIC {
            return Err(GridError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != BINARY_VERSION {
            return Err(GridError::Format(format!("unsupported version {version}")));
        }
        let dim = header[7] as usize;
        let res0 = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let res1 = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let grid: Grid = match header[6] {
            0 => TorusGrid::new(dim, res0)?.into(),
            1 => {
                let mut lower = [0.0; 2];
                let mut upper = [0.0; 2];
                let mut buf = [0u8; 8];
                for axis in 0..dim {
                    r.read_exact(&mut buf)?;
                    lower[axis] = f64::from_le_bytes(buf);
                    r.read_exact(&mut buf)?;
                    upper[axis] = f64::from_le_bytes(buf);
                }
                BoxGrid::new(dim, lower, upper, [res0, res1])?.into()
            }
            other => return Err(GridError::Format(format!("unknown grid kind {other}"))),
        };
        let mut values = Vec::with_capacity(grid.len());
        let mut buf = [0u8; 8];
        for _ in 0..grid.len() {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Self::new(grid, values)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"OSCG";
const BINARY_VERSION: u16 = 1;

fn fmt_err(e: impl std::fmt::Display) -> GridError {
    GridError::Format(e.to_string())
}

/// Node selection for seminorms and norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// Every node.
    All,
    /// Every node carrying a full stencil (all nodes on the torus).
    Interior,
    /// Nodes inside a closed coordinate rectangle.
    Rect { lower: Point, upper: Point },
}

impl Region {
    pub fn contains(&self, grid: &Grid, k: usize) -> bool {
        match self {
            Region::All => true,
            Region::Interior => grid.has_stencil(k),
            Region::Rect { lower, upper } => {
                let p = grid.point(k);
                let slack = 1e-12 * (1.0 + grid.spacing());
                (0..grid.dim()).all(|a| p[a] >= lower[a] - slack && p[a] <= upper[a] + slack)
            }
        }
    }

    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.len()).filter(|&k| self.contains(grid, k)).collect()
    }
}

/// Second differences of `u` at a node along the four stencil directions.
pub fn second_diffs_at(u: &GridFunction, node: usize) -> Result<SecondDiffs, GridError> {
    let grid = u.grid();
    if node >= grid.len() {
        return Err(GridError::NodeOutOfRange(node));
    }
    if !grid.has_stencil(node) {
        return Err(GridError::StencilUnavailable { node });
    }
    let h2 = grid.spacing().powi(2);
    let v = u.values();
    let at = |o: [i64; 2]| v[grid.neighbor(node, o).expect("stencil checked")];
    let center = v[node];
    let dd = |o: [i64; 2]| (at(o) - 2.0 * center + at([-o[0], -o[1]])) / h2;
    Ok(match grid.dim() {
        1 => SecondDiffs { dim: 1, d: [dd([1, 0]), 0.0, 0.0, 0.0] },
        _ => SecondDiffs {
            dim: 2,
            d: [dd([1, 0]), dd([0, 1]), dd([1, 1]), dd([1, -1])],
        },
    })
}

/// Centered discrete Hessian: second differences on the diagonal and the
/// 4-point cross formula off the diagonal.
pub fn hessian_at(u: &GridFunction, node: usize) -> Result<SymMatrix, GridError> {
    Ok(second_diffs_at(u, node)?.hessian())
}

/// Frobenius norm of the discrete Hessian at every stencil node, zero elsewhere.
pub fn hessian_norm_field(u: &GridFunction) -> GridFunction {
    let values = (0..u.len()).map(|k| hessian_at(u, k).map(|h| h.norm()).unwrap_or(0.0)).collect();
    GridFunction { grid: u.grid, values }
}

/// An affine function anchored at a center point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub value: f64,
    pub gradient: [f64; 2],
}

impl Affine {
    pub fn eval(&self, displacement: Point) -> f64 {
        self.value + self.gradient[0] * displacement[0] + self.gradient[1] * displacement[1]
    }
}

/// `sup |u(x) - l(x)| / |x - c|^(1 + alpha)` over nodes with
/// `exclusion < |x - c| <= radius`.
pub fn holder_quotient(
    u: &GridFunction,
    center: usize,
    affine: &Affine,
    alpha: f64,
    exclusion: f64,
    radius: f64,
) -> Result<f64, GridError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(GridError::InvalidHolderExponent(alpha));
    }
    if exclusion >= radius {
        return Err(GridError::EmptyAnnulus { exclusion, radius });
    }
    let grid = u.grid();
    if center >= grid.len() {
        return Err(GridError::NodeOutOfRange(center));
    }
    let c = grid.point(center);
    let available = grid.distance_to_boundary(c);
    if radius > available + 1e-12 {
        return Err(GridError::RadiusExceedsDomain { radius, available });
    }
    let mut sup: f64 = 0.0;
    for k in 0..grid.len() {
        let d = grid.displacement(c, grid.point(k));
        let r = d[0].hypot(d[1]);
        if r <= exclusion || r > radius || r == 0.0 {
            continue;
        }
        let q = (u.value(k) - affine.eval(d)).abs() / r.powf(1.0 + alpha);
        sup = sup.max(q);
    }
    Ok(sup)
}

/// Sup of the Frobenius norm of the discrete Hessian over region nodes lying
/// farther than `exclusion_radius` from every exclusion center.
pub fn second_difference_sup(
    u: &GridFunction,
    exclusion_centers: &[Point],
    exclusion_radius: f64,
    region: &Region,
) -> Result<f64, GridError> {
    let grid = u.grid();
    let mut sup: f64 = 0.0;
    for k in region.nodes(grid) {
        let p = grid.point(k);
        if exclusion_centers.iter().any(|c| grid.distance(*c, p) <= exclusion_radius) {
            continue;
        }
        sup = sup.max(hessian_at(u, k)?.norm());
    }
    Ok(sup)
}

/// Discrete `L^p` norm `(h^n sum |u|^p)^(1/p)` over region nodes; `p = inf`
/// gives the sup. On boxes the weights follow the trapezoid rule over the
/// index block spanned by the region, so constants integrate exactly.
pub fn lp_norm(u: &GridFunction, p: f64, region: &Region) -> Result<f64, GridError> {
    if p.is_nan() || p < 1.0 {
        return Err(GridError::InvalidExponent(p));
    }
    let grid = u.grid();
    let nodes = region.nodes(grid);
    if nodes.is_empty() {
        return Err(GridError::EmptyRegion);
    }
    if p.is_infinite() {
        return Ok(nodes.iter().fold(0.0, |m, &k| m.max(u.value(k).abs())));
    }
    let h = grid.spacing();
    let dim = grid.dim();
    // index block covered by the region, per axis
    let mut lo = [usize::MAX; 2];
    let mut hi = [0usize; 2];
    for &k in &nodes {
        let c = grid.coords(k);
        for a in 0..dim {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let weight = |k: usize| -> f64 {
        if grid.is_periodic() {
            return h.powi(dim as i32);
        }
        let c = grid.coords(k);
        (0..dim)
            .map(|a| if lo[a] == hi[a] { 1.0 } else if c[a] == lo[a] || c[a] == hi[a] { 0.5 * h } else { h })
            .product()
    };
    let sum: f64 = nodes.iter().map(|&k| weight(k) * u.value(k).abs().powf(p)).sum();
    Ok(sum.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quadratic(grid: Grid, m: SymMatrix) -> GridFunction {
        GridFunction::from_fn(grid, |p| 0.5 * m.quadratic_form(&p))
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let m = SymMatrix::new2(1.3, -0.4, 0.75);
        let grid: Grid = BoxGrid::new(2, [-1.0, -0.5], [1.0, 1.5], [40, 40]).unwrap().into();
        let u = quadratic(grid, m);
        for k in 0..grid.len() {
            if grid.has_stencil(k) {
                let h = hessian_at(&u, k).unwrap();
                assert!(h.max_abs_diff(&m) < 1e-10 * m.norm().max(1.0), "node {k}: {h}");
            }
        }
        let u1 = quadratic(BoxGrid::unit(1, 16).unwrap().into(), SymMatrix::scalar(3.0));
        assert!((hessian_at(&u1, 5).unwrap().m11() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn hessian_of_constant_is_zero() {
        let grid: Grid = TorusGrid::new(2, 16).unwrap().into();
        let u = GridFunction::from_fn(grid, |_| 4.5);
        assert_eq!(hessian_at(&u, 37).unwrap().norm(), 0.0);
    }

    #[test]
    fn hessian_stencil_unavailable_on_boundary() {
        let grid: Grid = BoxGrid::unit(2, 8).unwrap().into();
        let u = GridFunction::zeros(grid);
        assert!(matches!(hessian_at(&u, 0), Err(GridError::StencilUnavailable { node: 0 })));
    }

    #[test]
    fn hessian_converges_at_second_order_on_sine() {
        // node at x = 1/4 where u'' = -(2 pi)^2
        let exact = -(2.0 * PI).powi(2);
        let err = |n: usize| {
            let grid: Grid = TorusGrid::new(1, n).unwrap().into();
            let u = GridFunction::from_fn(grid, |p| (2.0 * PI * p[0]).sin());
            (hessian_at(&u, n / 4).unwrap().m11() - exact).abs()
        };
        let (e64, e128, e256) = (err(64), err(128), err(256));
        let h = 1.0 / 256.0;
        assert!(e256 < 2.0 * (2.0 * PI).powi(2) * (PI * h).powi(2), "{e256}");
        for ratio in [e64 / e128, e128 / e256] {
            assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
        }
    }

    #[test]
    fn holder_quotient_examples() {
        let grid: Grid = BoxGrid::new(1, [-1.0, 0.0], [1.0, 0.0], [200, 0]).unwrap().into();
        let center = grid.nearest_node([0.0, 0.0]);
        let affine_u = GridFunction::from_fn(grid, |p| 2.0 + 3.0 * p[0]);
        let l = Affine { value: 2.0, gradient: [3.0, 0.0] };
        assert!(holder_quotient(&affine_u, center, &l, 0.5, 0.0, 0.9).unwrap() < 1e-12);

        let half_sq = GridFunction::from_fn(grid, |p| 0.5 * p[0] * p[0]);
        let zero = Affine { value: 0.0, gradient: [0.0, 0.0] };
        let q = holder_quotient(&half_sq, center, &zero, 1.0, 0.0, 0.9).unwrap();
        assert!((q - 0.5).abs() < 1e-12);

        assert!(matches!(
            holder_quotient(&half_sq, center, &zero, 1.0, 0.5, 0.5),
            Err(GridError::EmptyAnnulus { .. })
        ));
    }

    #[test]
    fn second_difference_sup_of_quadratic_is_its_norm() {
        let m = SymMatrix::new2(2.0, 1.0, -0.5);
        let grid: Grid = BoxGrid::unit(2, 20).unwrap().into();
        let u = quadratic(grid, m);
        let s = second_difference_sup(&u, &[], 0.0, &Region::Interior).unwrap();
        assert!((s - m.norm()).abs() < 1e-9);
        let zero = GridFunction::zeros(grid);
        assert_eq!(second_difference_sup(&zero, &[[0.5, 0.5]], 0.1, &Region::Interior).unwrap(), 0.0);
    }

    #[test]
    fn lp_norm_examples() {
        let grid: Grid = BoxGrid::unit(2, 32).unwrap().into();
        let c = GridFunction::from_fn(grid, |_| -2.5);
        assert!((lp_norm(&c, 3.0, &Region::All).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(lp_norm(&GridFunction::zeros(grid), 2.0, &Region::All).unwrap(), 0.0);

        let line: Grid = BoxGrid::unit(1, 256).unwrap().into();
        let x = GridFunction::from_fn(line, |p| p[0]);
        let v = lp_norm(&x, 2.0, &Region::All).unwrap();
        assert!((v - 3f64.sqrt().recip()).abs() < 1e-3, "{v}");
        assert!(matches!(lp_norm(&x, 0.5, &Region::All), Err(GridError::InvalidExponent(_))));
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let grid: Grid = BoxGrid::new(2, [0.0, -1.0], [2.0, 1.0], [10, 10]).unwrap().into();
        let u = GridFunction::from_fn(grid, |p| (p[0] * 3.1).sin() + p[1]);
        let mut bytes = Vec::new();
        u.write_binary(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"OSCG");
        assert_eq!(GridFunction::read_binary(bytes.as_slice()).unwrap(), u);

        let mut text = Vec::new();
        u.write_csv(&mut text).unwrap();
        assert_eq!(GridFunction::read_csv(grid, text.as_slice()).unwrap(), u);
    }

    #[test]
    fn periodic_interpolation_hits_nodes_and_wraps() {
        let grid: Grid = TorusGrid::new(2, 16).unwrap().into();
        let u = GridFunction::from_fn(grid, |p| (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).sin());
        let k = grid.index([3, 7]);
        assert!((u.interpolate_periodic(grid.point(k)) - u.value(k)).abs() < 1e-14);
        let p = grid.point(k);
        assert!((u.interpolate_periodic([p[0] + 2.0, p[1] - 1.0]) - u.value(k)).abs() < 1e-12);
    }
}
