use serde::{Deserialize, Serialize};

use super::{solve_dense, BenchError};
use crate::cell::CorrectorTable;
use crate::grid::{GridFunction, Point};
use crate::matrix::SymMatrix;
use crate::operator::Operator;

/// Remainders at or below this level count as exact.
pub const EXACT_FLOOR: f64 = 1e-9;

const MAX_ROUNDS: usize = 20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampanatoLevel {
    pub k: usize,
    pub radius: f64,
    pub nodes: usize,
    pub a: Vec<f64>,
    pub m: Vec<f64>,
    /// `|F_bar(M_k) - f(center)|` after projection.
    pub constraint_defect: f64,
    /// Sup of the fit remainder over the ball.
    pub remainder: f64,
    /// `E_k / E_{k-1}` when both are above the exactness floor.
    pub ratio: Option<f64>,
    /// `mu^k >= 8 epsilon`.
    pub resolved: bool,
    pub exact: bool,
    pub rounds: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionFit {
    pub center: Point,
    pub mu: f64,
    pub epsilon: f64,
    pub levels: Vec<CampanatoLevel>,
    pub notes: Vec<String>,
}

impl DecompositionFit {
    /// Largest ratio over resolved, non-exact consecutive levels.
    pub fn max_resolved_ratio(&self) -> Option<f64> {
        self.levels.iter().filter(|l| l.resolved).filter_map(|l| l.ratio).reduce(f64::max)
    }
}

/// Moves `m` along the identity until `F_bar(m + s I) = target`.
pub fn project_onto_level_set(fbar: &dyn Operator, m: &SymMatrix, target: f64) -> Result<SymMatrix, BenchError> {
    let dim = m.dim();
    let eval = |s: f64| fbar.value(&(*m + SymMatrix::identity(dim) * s), [0.0, 0.0]) - target;
    let g0 = eval(0.0);
    if !g0.is_finite() {
        return Err(BenchError::Fit(format!("effective operator undefined at {m}")));
    }
    if g0 == 0.0 {
        return Ok(*m);
    }
    let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 0.125;
    let (mut lo, mut hi) = (0.0, 0.0);
    for _ in 0..60 {
        let s = dir * step;
        let g = eval(s);
        if !g.is_finite() {
            return Err(BenchError::Fit("effective operator undefined while bracketing".into()));
        }
        if g.signum() != g0.signum() || g == 0.0 {
            (lo, hi) = if dir > 0.0 { (0.0, s) } else { (s, 0.0) };
            break;
        }
        step *= 2.0;
    }
    if lo == hi {
        return Err(BenchError::Fit("no sign change along the identity".into()));
    }
    // bisection with a false-position guess each step
    let (mut glo, mut ghi) = (eval(lo), eval(hi));
    for _ in 0..200 {
        let mid = if ghi != glo { lo - glo * (hi - lo) / (ghi - glo) } else { 0.5 * (lo + hi) };
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        let gm = eval(mid);
        if gm == 0.0 || (hi - lo) < 1e-15 * (1.0 + mid.abs()) {
            lo = mid;
            hi = mid;
            break;
        }
        if gm < 0.0 {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
        let bisect = 0.5 * (lo + hi);
        let gb = eval(bisect);
        if gb < 0.0 {
            lo = bisect;
            glo = gb;
        } else {
            hi = bisect;
            ghi = gb;
        }
    }
    let s = if glo.abs() <= ghi.abs() { lo } else { hi };
    Ok(*m + SymMatrix::identity(dim) * s)
}

fn quadratic_basis(dim: usize, d: Point) -> Vec<f64> {
    match dim {
        1 => vec![0.5 * d[0] * d[0]],
        _ => vec![0.5 * d[0] * d[0], 0.5 * d[1] * d[1], d[0] * d[1]],
    }
}

fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rows.first()?.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for (r, t) in rows.iter().zip(rhs) {
        for i in 0..n {
            b[i] += r[i] * t;
            for j in 0..n {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    solve_dense(a, b)
}

/// Fits `u(x) - u(c) ~ <a, x - c> + 1/2 <x - c, M (x - c)> + eps^2 (w(M, x/eps) - w(M, c/eps))`
/// on balls of radius `dist(c, boundary) mu^k`, with `F_bar(M) = f_center`
/// enforced by projection after every least-squares round.
#[allow(clippy::too_many_arguments)]
pub fn campanato_fit(
    u: &GridFunction,
    center: Point,
    mu: f64,
    depth: usize,
    fbar: &dyn Operator,
    correctors: &CorrectorTable,
    epsilon: f64,
    f_center: f64,
) -> Result<DecompositionFit, BenchError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(BenchError::Config(format!("mu = {mu} must lie in (0, 1)")));
    }
    let grid = *u.grid();
    let dim = grid.dim();
    let c_node = grid.nearest_node(center);
    let c = grid.point(c_node);
    let base_radius = grid.distance_to_boundary(c);
    let h = grid.spacing();
    let u_c = u.value(c_node);
    let yc = [c[0] / epsilon, c[1] / epsilon];
    let mut notes = Vec::new();
    let mut levels: Vec<CampanatoLevel> = Vec::new();
    let mut m = project_onto_level_set(fbar, &SymMatrix::zero(dim), f_center)?;
    for k in 0..=depth {
        let radius = base_radius * mu.powi(k as i32);
        let ball: Vec<(Point, f64)> = (0..grid.len())
            .filter_map(|n| {
                let d = grid.displacement(c, grid.point(n));
                (d[0].hypot(d[1]) <= radius + 1e-12).then(|| (d, u.value(n) - u_c))
            })
            .collect();
        let unknowns = dim + quadratic_basis(dim, [0.0, 0.0]).len();
        if radius < 2.0 * h || ball.len() < unknowns + 2 {
            notes.push(format!("level {k}: radius {radius:.3e} below the grid resolution; depth truncated"));
            break;
        }
        if mu.powi(k as i32) < epsilon {
            notes.push(format!("level {k}: mu^k below epsilon; no ratio asserted"));
        }
        let targets = |m: &SymMatrix| -> Result<Vec<f64>, BenchError> {
            let wc = correctors.eval(m, yc)?;
            ball.iter()
                .map(|(d, v)| {
                    let y = [(c[0] + d[0]) / epsilon, (c[1] + d[1]) / epsilon];
                    Ok(v - epsilon * epsilon * (correctors.eval(m, y)? - wc))
                })
                .collect()
        };
        let mut a = vec![0.0; dim];
        let mut rounds = 0;
        for round in 0..MAX_ROUNDS {
            rounds = round + 1;
            let t = targets(&m)?;
            let rows: Vec<Vec<f64>> = ball
                .iter()
                .map(|(d, _)| {
                    let mut r: Vec<f64> = d[..dim].to_vec();
                    r.extend(quadratic_basis(dim, *d));
                    r
                })
                .collect();
            let sol = least_squares(&rows, &t).ok_or_else(|| BenchError::Fit("singular normal equations".into()))?;
            let fitted = SymMatrix::from_coords(dim, &sol[dim..]);
            let projected = project_onto_level_set(fbar, &fitted, f_center)?;
            // refit the gradient with M fixed
            let t = targets(&projected)?;
            let lin_rows: Vec<Vec<f64>> = ball.iter().map(|(d, _)| d[..dim].to_vec()).collect();
            let lin_rhs: Vec<f64> =
                ball.iter().zip(&t).map(|((d, _), tv)| tv - 0.5 * projected.quadratic_form(&d[..dim])).collect();
            a = least_squares(&lin_rows, &lin_rhs).ok_or_else(|| BenchError::Fit("singular gradient fit".into()))?;
            let change = projected.max_abs_diff(&m);
            m = projected;
            if change <= 1e-12 * (1.0 + m.norm()) {
                break;
            }
            if round + 1 == MAX_ROUNDS {
                notes.push(format!("level {k}: alternating fit stopped after {MAX_ROUNDS} rounds"));
            }
        }
        let t = targets(&m)?;
        let remainder = ball
            .iter()
            .zip(&t)
            .map(|((d, _), tv)| {
                let lin: f64 = a.iter().zip(&d[..dim]).map(|(ai, di)| ai * di).sum();
                (tv - lin - 0.5 * m.quadratic_form(&d[..dim])).abs()
            })
            .fold(0.0, f64::max);
        let exact = remainder <= EXACT_FLOOR;
        let ratio = levels
            .last()
            .filter(|prev| !prev.exact && !exact)
            .map(|prev| remainder / prev.remainder);
        levels.push(CampanatoLevel {
            k,
            radius,
            nodes: ball.len(),
            a: a.clone(),
            m: m.coords(),
            constraint_defect: (fbar.value(&m, [0.0, 0.0]) - f_center).abs(),
            remainder,
            ratio,
            resolved: mu.powi(k as i32) >= 8.0 * epsilon,
            exact,
            rounds,
        });
    }
    Ok(DecompositionFit { center: c, mu, epsilon, levels, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::builtin;

    #[test]
    fn projection_on_a_linear_operator_solves_for_the_shift() {
        // the Pucci operator increases strictly along the identity
        let spec = builtin("pucci2d").unwrap();
        let m = SymMatrix::new2(1.0, 1.0, 0.0);
        let p = project_onto_level_set(&spec, &m, -4.0).unwrap();
        assert!((spec.value(&p, [0.0, 0.0]) + 4.0).abs() < 1e-10);
    }

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, (i * i) as f64]).collect();
        let rhs: Vec<f64> = (0..6).map(|i| 2.0 - (i as f64) + 0.5 * (i * i) as f64).collect();
        let x = least_squares(&rows, &rhs).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] + 1.0).abs() < 1e-10 && (x[2] - 0.5).abs() < 1e-10);
    }
}
