//! Property checks on effective operators and correctors.
//!
//! Checks return reports with a `passed` flag; only invalid inputs and solver
//! failures are errors.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{CellCache, CellOptions, CellSolution};
use super::CellError;
use crate::grid::{second_diffs_at, Point};
use crate::matrix::SymMatrix;
use crate::operator::{translate_scale, Operator, OperatorSpec, DIAGNOSTIC_SEED};

pub const MIN_ELLIPTICITY_TRIALS: usize = 50;

fn random_matrix(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> SymMatrix {
    match dim {
        1 => SymMatrix::scalar(rng.gen_range(-scale..scale)),
        _ => SymMatrix::new2(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)),
    }
}

/// Random PSD matrix with Frobenius norm in `[0.1, 2]`; every fourth draw is
/// rank one.
fn random_psd(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> SymMatrix {
    let size: f64 = rng.gen_range(0.1..2.0);
    if dim == 1 {
        return SymMatrix::scalar(size);
    }
    let mut dir = || {
        let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        [t.cos(), t.sin()]
    };
    let mut n = SymMatrix::outer(2, dir());
    if !k.is_multiple_of(4) {
        let second = SymMatrix::outer(2, dir());
        n = n + second * 0.7;
    }
    n * (size / n.norm())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllipticitySample {
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub difference: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub operator_id: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest `(F_bar(M+N) - F_bar(M)) - lambda |N|` seen.
    pub worst_lower_margin: f64,
    /// Smallest `Lambda |N| - (F_bar(M+N) - F_bar(M))` seen.
    pub worst_upper_margin: f64,
    pub samples: Vec<EllipticitySample>,
    pub passed: bool,
}

/// Samples `(M, N)` with `N` positive semidefinite and checks
/// `lambda |N| - slack <= F_bar(M + N) - F_bar(M) <= Lambda |N| + slack`,
/// `slack = 4 tol (1 + |N|)`.
pub fn check_effective_ellipticity(
    op: &dyn Operator,
    opts: &CellOptions,
    trials: usize,
    cache: &CellCache,
) -> Result<EllipticityReport, CellError> {
    if trials < MIN_ELLIPTICITY_TRIALS {
        return Err(CellError::Argument(format!("need at least {MIN_ELLIPTICITY_TRIALS} trials, got {trials}")));
    }
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(DIAGNOSTIC_SEED ^ 0xE11);
    let pairs: Vec<(SymMatrix, SymMatrix)> = (0..trials)
        .map(|k| {
            let m = random_matrix(&mut rng, dim, 3.0);
            let n = if k == 0 { SymMatrix::zero(dim) } else { random_psd(&mut rng, dim, k) };
            (m, n)
        })
        .collect();
    let (lambda, big_lambda) = op.bounds();
    let samples: Vec<Result<EllipticitySample, CellError>> = pairs
        .par_iter()
        .map(|(m, n)| {
            let a = cache.get_or_solve(op, m, opts)?.effective_value;
            let b = cache.get_or_solve(op, &(*m + *n), opts)?.effective_value;
            let norm = n.norm();
            Ok(EllipticitySample {
                m: m.coords(),
                n: n.coords(),
                difference: b - a,
                lower: lambda * norm,
                upper: big_lambda * norm,
                slack: 4.0 * opts.tol * (1.0 + norm),
            })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
    let violations = samples
        .iter()
        .filter(|s| s.difference < s.lower - s.slack || s.difference > s.upper + s.slack)
        .count();
    let worst_lower_margin = samples.iter().map(|s| s.difference - s.lower).fold(f64::INFINITY, f64::min);
    let worst_upper_margin = samples.iter().map(|s| s.upper - s.difference).fold(f64::INFINITY, f64::min);
    Ok(EllipticityReport {
        operator_id: op.id(),
        trials,
        violations,
        worst_lower_margin,
        worst_upper_margin,
        samples,
        passed: violations == 0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingSample {
    pub n: Vec<f64>,
    /// Effective value of `F_{M,mu}` at `N`.
    pub direct: f64,
    /// `(F_bar(mu N + M) - F_bar(M)) / mu`.
    pub identity: f64,
    pub value_discrepancy: f64,
    /// Sup of `w_{F_{M,mu}}(N) - (w(mu N + M) - w(M)) / mu`.
    pub corrector_discrepancy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub operator_id: String,
    pub anchor: Vec<f64>,
    pub mu: f64,
    pub samples: Vec<ScalingSample>,
    pub max_discrepancy: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Compares the effective value of the translated and rescaled operator with
/// the difference quotient of `F_bar`, and the corresponding correctors.
pub fn check_scaling_identity(
    base: Arc<dyn Operator>,
    m: &SymMatrix,
    mu: f64,
    ns: &[SymMatrix],
    opts: &CellOptions,
    cache: &CellCache,
) -> Result<ScalingReport, CellError> {
    let cell_m = cache.get_or_solve(base.as_ref(), m, opts)?;
    let scaled = Arc::new(translate_scale(base.clone(), m, mu, &cell_m)?);
    let samples: Vec<Result<ScalingSample, CellError>> = ns
        .par_iter()
        .map(|n| {
            let target = *n * mu + *m;
            let cell_t = cache.get_or_solve(base.as_ref(), &target, opts)?;
            let direct = super::solve::solve_cell(scaled.as_ref(), n, opts)?;
            let identity = (cell_t.effective_value - cell_m.effective_value) / mu;
            let corrector_discrepancy = direct
                .corrector
                .values()
                .iter()
                .zip(cell_t.corrector.values().iter().zip(cell_m.corrector.values()))
                .map(|(v, (a, b))| (v - (a - b) / mu).abs())
                .fold(0.0, f64::max);
            Ok(ScalingSample {
                n: n.coords(),
                direct: direct.effective_value,
                identity,
                value_discrepancy: (direct.effective_value - identity).abs(),
                corrector_discrepancy,
            })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
    let max_discrepancy = samples.iter().map(|s| s.value_discrepancy).fold(0.0, f64::max);
    let threshold = 10.0 * opts.tol;
    Ok(ScalingReport {
        operator_id: base.id(),
        anchor: m.coords(),
        mu,
        samples,
        max_discrepancy,
        threshold,
        passed: max_discrepancy <= threshold,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicitySample {
    pub m: Vec<f64>,
    pub first: f64,
    pub second: f64,
    pub minimum: f64,
    /// `min(first, second) - minimum`.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: Vec<MonotonicitySample>,
    pub violations: usize,
    pub passed: bool,
}

/// Checks that the effective operator of `min(F1, F2)` lies below the
/// minimum of the two effective operators.
pub fn check_min_monotonicity(
    f1: &OperatorSpec,
    f2: &OperatorSpec,
    ms: &[SymMatrix],
    opts: &CellOptions,
    cache: &CellCache,
) -> Result<MonotonicityReport, CellError> {
    if (f1.lambda - f2.lambda).abs() > 1e-12 || (f1.big_lambda - f2.big_lambda).abs() > 1e-12 {
        return Err(CellError::Argument("operators must share (lambda, Lambda)".into()));
    }
    let name = format!("min({},{})", f1.name, f2.name);
    let fmin = OperatorSpec::combine(&name, "min", &[f1, f2])?;
    let samples: Vec<Result<MonotonicitySample, CellError>> = ms
        .par_iter()
        .map(|m| {
            let first = cache.get_or_solve(f1, m, opts)?.effective_value;
            let second = cache.get_or_solve(f2, m, opts)?.effective_value;
            let minimum = cache.get_or_solve(&fmin, m, opts)?.effective_value;
            Ok(MonotonicitySample { m: m.coords(), first, second, minimum, gap: first.min(second) - minimum })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
    let violations = samples.iter().filter(|s| s.gap < -2.0 * opts.tol).count();
    Ok(MonotonicityReport { samples, violations, passed: violations == 0 })
}

/// Minimum over torus nodes of `|M + D_h^2 w|` and its ratio to `|M|`.
pub fn corrector_hessian_floor(cell: &CellSolution) -> (f64, f64) {
    let w = &cell.corrector;
    let anchor = cell.anchor;
    let min_norm = (0..w.len())
        .map(|k| {
            let s = second_diffs_at(w, k).expect("torus nodes carry stencils");
            (s.hessian() + anchor).norm()
        })
        .fold(f64::INFINITY, f64::min);
    let norm = anchor.norm();
    let ratio = if norm > 0.0 { min_norm / norm } else { f64::NAN };
    (min_norm, ratio)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyAudit {
    pub r: f64,
    /// `1 / min ratio` of the corrector Hessian floor of the minimum.
    pub l_est: f64,
    /// Largest `y`-oscillation of either operand over `|M| <= l_est R`.
    pub max_small_oscillation: f64,
    /// Smallest `F_cup - F_cap - kappa n^(gamma/2) |M|` over `|M| >= R`.
    pub min_large_gap: f64,
    pub passed: bool,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeySample {
    pub m: Vec<f64>,
    pub concave: f64,
    pub convex: f64,
    pub minimum: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyEqualityReport {
    pub audit: KeyAudit,
    /// False when the hypothesis audit fails; no equality is asserted then.
    pub applicable: bool,
    pub samples: Vec<KeySample>,
    pub worst: Option<KeySample>,
    pub threshold: f64,
    pub passed: bool,
}

fn y_samples(dim: usize, per_axis: usize) -> Vec<Point> {
    let step = 1.0 / per_axis as f64;
    match dim {
        1 => (0..per_axis).map(|i| [i as f64 * step, 0.0]).collect(),
        _ => (0..per_axis * per_axis).map(|k| [(k % per_axis) as f64 * step, (k / per_axis) as f64 * step]).collect(),
    }
}

/// Matrices with norms spread over `[lo, hi]`: a 1-d lattice, or random
/// directions in 2-d.
fn norm_samples(dim: usize, lo: f64, hi: f64, count: usize, seed: u64) -> Vec<SymMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .flat_map(|k| {
            let t = lo + (hi - lo) * k as f64 / (count - 1).max(1) as f64;
            if dim == 1 {
                vec![SymMatrix::scalar(t), SymMatrix::scalar(-t)]
            } else {
                let m = random_matrix(&mut rng, 2, 1.0);
                let norm = m.norm().max(1e-12);
                vec![m * (t / norm)]
            }
        })
        .collect()
}

fn oscillation(op: &OperatorSpec, m: &SymMatrix, ys: &[Point]) -> f64 {
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
        let v = op.value(m, *y);
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// Samples the hypotheses of the key equality for a concave/convex pair.
pub fn audit_key_hypotheses(
    concave: &OperatorSpec,
    convex: &OperatorSpec,
    r: f64,
    large_ms: &[SymMatrix],
    opts: &CellOptions,
    cache: &CellCache,
) -> Result<KeyAudit, CellError> {
    let dim = concave.dim;
    let fmin = OperatorSpec::combine("key-min", "min", &[concave, convex])?;
    let ys = y_samples(dim, if dim == 1 { 64 } else { 16 });
    // floor ratio from the minimum's correctors at the supplied large anchors
    let floors: Vec<Result<f64, CellError>> = large_ms
        .par_iter()
        .filter(|m| m.norm() >= r)
        .map(|m| Ok(corrector_hessian_floor(cache.get_or_solve(&fmin, m, opts)?.as_ref()).1))
        .collect();
    let floors = floors.into_iter().collect::<Result<Vec<_>, _>>()?;
    let min_ratio = floors.iter().copied().fold(1.0, f64::min);
    let l_est = if min_ratio > 0.0 { 1.0 / min_ratio } else { f64::INFINITY };
    let mut reason = None;
    let max_norm = large_ms.iter().map(SymMatrix::norm).fold(r, f64::max);
    let small_radius = if l_est.is_finite() { l_est * r } else { max_norm };
    let small = norm_samples(dim, 0.0, small_radius, 41, DIAGNOSTIC_SEED ^ 0x51);
    let max_small_oscillation = small
        .iter()
        .map(|m| oscillation(concave, m, &ys).max(oscillation(convex, m, &ys)))
        .fold(0.0, f64::max);
    if !l_est.is_finite() {
        reason = Some("corrector Hessian floor vanishes".to_string());
    } else if max_small_oscillation > 1e-10 {
        reason = Some(format!(
            "operands oscillate in y (osc {max_small_oscillation:.3e}) for |M| <= L R = {:.3}",
            l_est * r
        ));
    }
    let nf = dim as f64;
    let kappa = concave.kappa.max(convex.kappa);
    let gamma = concave.gamma.min(convex.gamma);
    let large = norm_samples(dim, r, max_norm.max(2.0 * small_radius), 41, DIAGNOSTIC_SEED ^ 0x1A);
    let mut min_large_gap = f64::INFINITY;
    for m in &large {
        let need = kappa * nf.powf(gamma / 2.0) * m.norm();
        for y in &ys {
            min_large_gap = min_large_gap.min(convex.value(m, *y) - concave.value(m, *y) - need);
        }
    }
    if reason.is_none() && min_large_gap < -1e-10 {
        reason = Some(format!("gap condition fails for |M| >= R (worst {min_large_gap:.3e})"));
    }
    Ok(KeyAudit { r, l_est, max_small_oscillation, min_large_gap, passed: reason.is_none(), reason })
}

/// Audits the hypotheses, then checks `eff(min) = min(eff(concave), eff(convex))`
/// within `3 tol` at every anchor.
pub fn check_key_equality(
    concave: &OperatorSpec,
    convex: &OperatorSpec,
    r: f64,
    ms: &[SymMatrix],
    opts: &CellOptions,
    cache: &CellCache,
) -> Result<KeyEqualityReport, CellError> {
    let threshold = 3.0 * opts.tol;
    let audit = audit_key_hypotheses(concave, convex, r, ms, opts, cache)?;
    if !audit.passed {
        return Ok(KeyEqualityReport { audit, applicable: false, samples: Vec::new(), worst: None, threshold, passed: false });
    }
    let fmin = OperatorSpec::combine("key-min", "min", &[concave, convex])?;
    let samples: Vec<Result<KeySample, CellError>> = ms
        .par_iter()
        .map(|m| {
            let a = cache.get_or_solve(concave, m, opts)?.effective_value;
            let b = cache.get_or_solve(convex, m, opts)?.effective_value;
            let c = cache.get_or_solve(&fmin, m, opts)?.effective_value;
            Ok(KeySample { m: m.coords(), concave: a, convex: b, minimum: c, discrepancy: (c - a.min(b)).abs() })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
    let worst = samples.iter().max_by(|a, b| a.discrepancy.total_cmp(&b.discrepancy)).cloned();
    let passed = samples.iter().all(|s| s.discrepancy <= threshold);
    Ok(KeyEqualityReport { audit, applicable: true, samples, worst, threshold, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::builtin;

    #[test]
    fn random_increments_are_psd_with_bounded_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..200 {
            let n = random_psd(&mut rng, 2, k);
            assert!(n.is_psd(1e-12));
            assert!(n.norm() >= 0.1 - 1e-12 && n.norm() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn too_few_trials_and_mismatched_bounds_are_errors() {
        let cos = builtin("cos1d").unwrap();
        let cache = CellCache::new();
        assert!(check_effective_ellipticity(&cos, &CellOptions::new(64), 10, &cache).is_err());
        let key = builtin("key1d").unwrap();
        assert!(check_min_monotonicity(&cos, &key, &[SymMatrix::scalar(1.0)], &CellOptions::new(64), &cache).is_err());
    }

    #[test]
    fn norm_samples_span_the_requested_range() {
        let ms = norm_samples(2, 1.0, 3.0, 5, 9);
        assert_eq!(ms.len(), 5);
        assert!((ms[0].norm() - 1.0).abs() < 1e-12 && (ms[4].norm() - 3.0).abs() < 1e-12);
        assert_eq!(norm_samples(1, 0.0, 1.0, 3, 0).len(), 6);
    }
}
