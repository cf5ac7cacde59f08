//! Policy iteration for monotone min/max schemes on torus and box grids.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::Hasher;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::linear::{StencilPattern, NO_SLOT, OFFSETS};
use super::SolveError;
use crate::grid::{Grid, Point};
use crate::operator::{ActiveLeaf, Operator};
use crate::stencil::SecondDiffs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    PolicyIteration,
    /// Damped steps with a frozen policy matrix after policy iteration stalls.
    Chord,
    DampedFixedPoint,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub method: SolveMethod,
    /// Distinct policies visited.
    pub policies: usize,
    /// Sup residual after each accepted step.
    pub history: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, max_sweeps: 100_000 }
    }
}

/// How grid points map to the periodic variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum YMap {
    Scaled(f64),
    Frozen,
}

impl YMap {
    fn apply(self, x: Point) -> Point {
        match self {
            YMap::Scaled(eps) => [x[0] / eps, x[1] / eps],
            YMap::Frozen => [0.0, 0.0],
        }
    }
}

/// Discretized problem `G(anchor + D_h^2 u, y(x)) - delta u - c = f` at
/// stencil nodes and `u = u0` elsewhere; with `ergodic`, `c` is unknown and
/// `u` is pinned to 0 at node 0.
pub(crate) struct Scheme<'a> {
    pub op: &'a dyn Operator,
    pub grid: Grid,
    pub ymap: YMap,
    pub anchor: SecondDiffs,
    pub delta: f64,
    pub rhs: Vec<f64>,
    pub ergodic: bool,
}

pub(crate) struct EngineOutput {
    pub values: Vec<f64>,
    pub constant: f64,
    pub report: SolveReport,
}

pub(crate) struct Engine<'a> {
    scheme: Scheme<'a>,
    neighbors: Vec<[usize; 9]>,
    rows: Vec<bool>,
    ys: Vec<Point>,
    inv_h2: f64,
    dirs: usize,
    pattern: Option<StencilPattern>,
}

impl<'a> Engine<'a> {
    pub fn new(scheme: Scheme<'a>) -> Self {
        let grid = scheme.grid;
        let n = grid.len();
        let dirs = if grid.dim() == 1 { 1 } else { 4 };
        let used = 1 + 2 * dirs;
        let neighbors: Vec<[usize; 9]> = (0..n)
            .map(|k| {
                let mut nb = [NO_SLOT; 9];
                if grid.has_stencil(k) {
                    for (j, o) in OFFSETS.iter().enumerate().take(used) {
                        nb[j] = grid.neighbor(k, *o).unwrap_or(NO_SLOT);
                    }
                }
                nb
            })
            .collect();
        let rows = (0..n).map(|k| grid.has_stencil(k)).collect();
        let ys = (0..n).map(|k| scheme.ymap.apply(grid.point(k))).collect();
        let inv_h2 = grid.spacing().powi(-2);
        Self { scheme, neighbors, rows, ys, inv_h2, dirs, pattern: None }
    }

    /// `anchor + D_h^2 u` at a stencil node.
    pub fn stencil(&self, u: &[f64], k: usize) -> SecondDiffs {
        let nb = &self.neighbors[k];
        let mut s = self.scheme.anchor;
        for j in 0..self.dirs {
            s.d[j] += (u[nb[1 + 2 * j]] + u[nb[2 + 2 * j]] - 2.0 * u[k]) * self.inv_h2;
        }
        s
    }

    pub fn residual_at(&self, u: &[f64], c: f64, k: usize) -> f64 {
        let s = self.stencil(u, k);
        self.scheme.op.scheme_value(&s, self.ys[k]) - self.scheme.delta * u[k] - self.scheme.rhs[k] - c
    }

    /// Scheme residual at stencil nodes, zero elsewhere.
    pub fn residuals(&self, u: &[f64], c: f64) -> Vec<f64> {
        (0..u.len()).map(|k| if self.rows[k] { self.residual_at(u, c, k) } else { 0.0 }).collect()
    }

    pub fn sup_residual(&self, u: &[f64], c: f64) -> f64 {
        (0..u.len()).filter(|&k| self.rows[k]).map(|k| self.residual_at(u, c, k).abs()).fold(0.0, f64::max)
    }

    /// Residual level reachable in floating point: the stencil amplifies
    /// rounding in `u` by `Lambda / h^2`.
    pub fn roundoff_floor(&self, u: &[f64]) -> f64 {
        let sup = u.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let (_, big_lambda) = self.scheme.op.bounds();
        let dim = self.scheme.grid.dim() as f64;
        16.0 * f64::EPSILON * dim * big_lambda * self.inv_h2 * (1.0 + sup)
    }

    fn policy(&self, u: &[f64]) -> Vec<ActiveLeaf> {
        let idle = ActiveLeaf { weights: [0.0; 4], offset: 0.0 };
        (0..u.len())
            .map(|k| if self.rows[k] { self.scheme.op.active(&self.stencil(u, k), self.ys[k]) } else { idle })
            .collect()
    }

    fn policy_hash(policy: &[ActiveLeaf]) -> u64 {
        let mut h = DefaultHasher::new();
        for leaf in policy {
            leaf.fingerprint(&mut h);
        }
        h.finish()
    }

    fn pattern(&mut self) -> Result<&StencilPattern, SolveError> {
        if self.pattern.is_none() {
            let pin = self.scheme.ergodic.then_some(0);
            self.pattern = Some(StencilPattern::new(&self.neighbors, &self.rows, pin)?);
        }
        Ok(self.pattern.as_ref().expect("pattern built"))
    }

    /// Matrix values and right-hand side of the linear scheme of a fixed
    /// policy; boundary rows keep `u`.
    fn assemble(&mut self, u: &[f64], c: f64, policy: &[ActiveLeaf]) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
        let dirs = self.dirs;
        let inv_h2 = self.inv_h2;
        let delta = self.scheme.delta;
        let ergodic = self.scheme.ergodic;
        let nodes = u.len();
        self.pattern()?;
        let pattern = self.pattern.as_ref().expect("pattern built");
        let mut vals = vec![0.0; pattern.nnz()];
        let mut rhs = vec![0.0; pattern.size()];
        for k in 0..nodes {
            let sl = pattern.slots(k);
            if !self.rows[k] {
                vals[sl[0]] = 1.0;
                rhs[k] = u[k];
                continue;
            }
            let leaf = &policy[k];
            let mut center = -delta;
            for j in 0..dirs {
                let w = leaf.weights[j] * inv_h2;
                vals[sl[1 + 2 * j]] += w;
                vals[sl[2 + 2 * j]] += w;
                center -= 2.0 * w;
            }
            vals[sl[0]] += center;
            let anchor_part: f64 =
                leaf.weights.iter().zip(self.scheme.anchor.d.iter()).map(|(w, d)| w * d).sum::<f64>();
            rhs[k] = self.scheme.rhs[k] - leaf.offset - anchor_part;
            if ergodic {
                vals[sl[9]] = -1.0;
            } else {
                rhs[k] += c;
            }
        }
        if ergodic {
            vals[pattern.slots(nodes)[0]] = 1.0;
        }
        Ok((vals, rhs))
    }

    /// Solves the linear scheme of a fixed policy.
    fn linear_solve(&mut self, u: &[f64], c: f64, policy: &[ActiveLeaf]) -> Result<(Vec<f64>, f64), SolveError> {
        let nodes = u.len();
        let (vals, rhs) = self.assemble(u, c, policy)?;
        let x = self.pattern.as_ref().expect("pattern built").solve(&vals, &rhs)?;
        let c_new = if self.scheme.ergodic { x[nodes] } else { c };
        Ok((x[..nodes].to_vec(), c_new))
    }

    /// `u <- u - omega J^-1 R(u)` with `J` the policy matrix at the entry
    /// point, refreshed when `omega` collapses. Steps are accepted only if
    /// the sup residual decreases. Returns the last accepted state.
    fn chord(&mut self, mut u: Vec<f64>, c: f64, opts: &SolverOptions, history: &mut Vec<f64>) -> Result<(Vec<f64>, usize, f64), SolveError> {
        let mut res = self.sup_residual(&u, c);
        let mut steps = 0;
        let mut refreshes = 0;
        'outer: while refreshes < 8 {
            let policy = self.policy(&u);
            let (vals, _) = self.assemble(&u, c, &policy)?;
            let lu = self.pattern.as_ref().expect("pattern built").factor(&vals)?;
            refreshes += 1;
            let mut omega: f64 = 1.0;
            while omega >= 1.0 / 64.0 {
                if res <= opts.tol.max(self.roundoff_floor(&u)) {
                    break 'outer;
                }
                if steps >= 10 * opts.max_iter {
                    break 'outer;
                }
                let r: Vec<f64> = self.residuals(&u, c).into_iter().map(|v| -v).collect();
                let du = lu.solve(&r)?;
                steps += 1;
                let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + omega * d).collect();
                let r_trial = self.sup_residual(&trial, c);
                if r_trial < res {
                    u = trial;
                    res = r_trial;
                    history.push(res);
                    omega = (1.25 * omega).min(1.0);
                } else {
                    omega *= 0.5;
                }
            }
        }
        Ok((u, steps, res))
    }

    /// Howard policy iteration with a sup-residual line search; falls back
    /// to damped fixed-point sweeps on a policy cycle.
    pub fn solve(&mut self, initial: Vec<f64>, c0: f64, opts: &SolverOptions) -> Result<EngineOutput, SolveError> {
        let start = Instant::now();
        let mut u = initial;
        let mut c = c0;
        let mut res = self.sup_residual(&u, c);
        if !res.is_finite() {
            return Err(SolveError::InvalidProblem("non-finite residual at the initial guess".into()));
        }
        let mut history = vec![res];
        let mut seen = HashSet::new();
        let mut iterations = 0;
        let mut cycled = false;
        while res > opts.tol.max(self.roundoff_floor(&u)) {
            if iterations >= opts.max_iter {
                return Err(SolveError::NonConvergence { residual: res, iterations });
            }
            let policy = self.policy(&u);
            if !seen.insert(Self::policy_hash(&policy)) {
                cycled = true; 
                break;
            }
            let (u_new, c_new) = self.linear_solve(&u, c, &policy)?;
            iterations += 1;
            let mut theta = 1.0;
            let mut accepted = None;
            while theta >= 1.0 / 1024.0 {
                let trial: Vec<f64> = u.iter().zip(&u_new).map(|(a, b)| a + theta * (b - a)).collect();
                let c_trial = c + theta * (c_new - c);
                let r = self.sup_residual(&trial, c_trial);
                if r <= res {
                    accepted = Some((trial, c_trial, r));
                    break;
                }
                theta *= 0.5;
            }
            match accepted {
                Some((trial, c_trial, r)) => {
                    u = trial;
                    c = c_trial;
                    res = r;
                    history.push(res);
                }
                None => {
                    cycled = true; 
                    break;
                }
            }
        }
        if !cycled {
            let report = SolveReport {
                iterations,
                residual: res,
                method: SolveMethod::PolicyIteration,
                policies: seen.len(),
                history,
                wall_time: start.elapsed(),
            };
            return Ok(EngineOutput { values: u, constant: c, report });
        }
        if self.scheme.ergodic {
            return Err(SolveError::NonConvergence { residual: res, iterations });
        }
        let (u, steps, res) = self.chord(u, c, opts, &mut history)?;
        let iterations = iterations + steps;
        if res <= opts.tol.max(self.roundoff_floor(&u)) {
            let report = SolveReport {
                iterations,
                residual: res,
                method: SolveMethod::Chord,
                policies: seen.len(),
                history,
                wall_time: start.elapsed(),
            };
            return Ok(EngineOutput { values: u, constant: c, report });
        }
        let (u, sweeps, res) = self.damped_fixed_point(u, c, opts)?;
        history.push(res);
        let report = SolveReport {
            iterations: iterations + sweeps,
            residual: res,
            method: SolveMethod::DampedFixedPoint,
            policies: seen.len(),
            history,
            wall_time: start.elapsed(),
        };
        Ok(EngineOutput { values: u, constant: c, report })
    }

    fn damped_fixed_point(&self, mut u: Vec<f64>, c: f64, opts: &SolverOptions) -> Result<(Vec<f64>, usize, f64), SolveError> {
        let dim = self.scheme.grid.dim() as f64;
        let (_, big_lambda) = self.scheme.op.bounds();
        let tau = 0.9 / (2.0 * dim * big_lambda * self.inv_h2 + self.scheme.delta);
        let mut res = f64::INFINITY;
        for sweep in 0..opts.max_sweeps {
            let r = self.residuals(&u, c);
            res = r.iter().fold(0.0, |m, v| m.max(v.abs()));
            if res <= opts.tol.max(self.roundoff_floor(&u)) {
                return Ok((u, sweep, res));
            }
            for (v, rk) in u.iter_mut().zip(&r) {
                *v += tau * rk;
            }
        }
        Err(SolveError::NonConvergence { residual: res, iterations: opts.max_sweeps })
    }
}
