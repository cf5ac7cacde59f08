//! Property checks on effective operators, one named flag each.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use oscillate::cell::{
    check_effective_ellipticity, check_key_equality, check_min_monotonicity, check_scaling_identity,
    corrector_hessian_floor, CellCache, CellError, CellOptions,
};
use oscillate::operator::{builtin, builtin_names, Operator, OperatorSpec};
use oscillate::SymMatrix;

pub const NAMES: [&str; 5] = ["sandwich", "scaling", "mono", "key", "floor"];

#[derive(Clone, Debug, Serialize)]
pub struct LemmaResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub data: serde_json::Value,
}

pub struct CheckContext<'a> {
    /// Operator chosen with `--spec`, if any.
    pub spec: Option<&'a OperatorSpec>,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub cache: &'a CellCache,
}

fn options(dim: usize, tol: f64) -> CellOptions {
    CellOptions::new(if dim == 1 { 256 } else { 32 }).with_tol(tol)
}

fn value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn targets<'a>(ctx: &CheckContext<'a>, defaults: &[&str]) -> Vec<OperatorSpec> {
    match ctx.spec {
        Some(s) => vec![s.clone()],
        None => defaults.iter().map(|n| builtin(n).expect("builtin")).collect(),
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
    let mut draw = || rng.gen_range(-3.0..3.0);
    if dim == 1 {
        SymMatrix::scalar(draw())
    } else {
        SymMatrix::new2(draw(), draw(), draw())
    }
}

pub fn run(name: &str, ctx: &CheckContext<'_>) -> Result<LemmaResult, CellError> {
    match name {
        "sandwich" => sandwich(ctx),
        "scaling" => scaling(ctx),
        "mono" => mono(ctx),
        "key" => key(ctx),
        "floor" => floor(ctx),
        other => Err(CellError::Argument(format!("unknown check {other}"))),
    }
}

fn sandwich(ctx: &CheckContext<'_>) -> Result<LemmaResult, CellError> {
    let mut reports = Vec::new();
    for spec in targets(ctx, builtin_names()) {
        reports.push(check_effective_ellipticity(&spec, &options(spec.dim, ctx.tol), ctx.samples.max(100), ctx.cache)?);
    }
    let passed = reports.iter().all(|r| r.passed);
    let detail = reports.iter().map(|r| format!("{}:{}", r.operator_id, r.violations)).collect::<Vec<_>>().join(" ");
    Ok(LemmaResult { name: "sandwich".into(), passed, detail: format!("violations {detail}"), data: value(&reports) })
}

fn scaling(ctx: &CheckContext<'_>) -> Result<LemmaResult, CellError> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x5CA1E);
    let mut reports = Vec::new();
    for spec in targets(ctx, &["cos1d", "separable2d", "key1d"]) {
        let dim = spec.dim;
        let base: Arc<dyn Operator> = Arc::new(spec);
        let opts = CellOptions::new(if dim == 1 { 128 } else { 16 }).with_tol(ctx.tol);
        for _ in 0..ctx.samples.clamp(1, 10) {
            let m = random_matrix(&mut rng, dim);
            let n = random_matrix(&mut rng, dim);
            let mu = rng.gen_range(0.25..2.0);
            reports.push(check_scaling_identity(base.clone(), &m, mu, &[n], &opts, ctx.cache)?);
        }
    }
    let worst = reports.iter().map(|r| r.max_discrepancy).fold(0.0, f64::max);
    let passed = reports.iter().all(|r| r.passed);
    Ok(LemmaResult {
        name: "scaling".into(),
        passed,
        detail: format!("max_discrepancy {worst:.3e} bound {:.1e}", 10.0 * ctx.tol),
        data: value(&reports),
    })
}

fn mono(ctx: &CheckContext<'_>) -> Result<LemmaResult, CellError> {
    let (cos, sin) = (builtin("cos1d")?, builtin("sin1d")?);
    let ms: Vec<SymMatrix> = (-12..=12).map(|k| SymMatrix::scalar(0.25 * k as f64)).collect();
    let report = check_min_monotonicity(&cos, &sin, &ms, &options(1, ctx.tol), ctx.cache)?;
    let gap = report.samples.iter().find(|s| (s.m[0] - 1.0).abs() < 1e-12).map_or(f64::NAN, |s| s.gap);
    Ok(LemmaResult {
        name: "mono".into(),
        passed: report.passed && gap > 0.0,
        detail: format!("gap {gap:.6} at M=1, violations {}", report.violations),
        data: value(&report),
    })
}

fn key(ctx: &CheckContext<'_>) -> Result<LemmaResult, CellError> {
    let opts = options(1, ctx.tol);
    let ms: Vec<SymMatrix> = (-12..=12).map(|k| SymMatrix::scalar(0.25 * k as f64)).collect();
    let key = check_key_equality(&builtin("key1d_concave")?, &builtin("key1d_convex")?, 1.0, &ms, &opts, ctx.cache)?;
    let pair = check_key_equality(&builtin("cos1d")?, &builtin("sin1d")?, 1.0, &ms, &opts, ctx.cache)?;
    let worst = key.worst.as_ref().map_or(f64::NAN, |w| w.discrepancy);
    let passed = key.applicable && key.passed && !pair.applicable;
    Ok(LemmaResult {
        name: "key".into(),
        passed,
        detail: format!("worst {worst:.3e} bound {:.1e}; cos/sin pair inapplicable {}", key.threshold, !pair.applicable),
        data: serde_json::json!({ "key": value(&key), "cos_sin": value(&pair) }),
    })
}

fn floor(ctx: &CheckContext<'_>) -> Result<LemmaResult, CellError> {
    let opts = options(1, ctx.tol);
    let key = builtin("key1d")?;
    let mut rows = Vec::new();
    for t in [2.0, 4.0, 8.0, 16.0] {
        for m in [SymMatrix::scalar(t), SymMatrix::scalar(-t)] {
            let cell = ctx.cache.get_or_solve(&key, &m, &opts)?;
            rows.push((m.m11(), corrector_hessian_floor(&cell).1));
        }
    }
    let min_ratio = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let cos = ctx.cache.get_or_solve(&builtin("cos1d")?, &SymMatrix::scalar(1.0), &opts)?;
    let cos_ratio = corrector_hessian_floor(&cos).1;
    let closed = 1.0 / 3f64.sqrt();
    Ok(LemmaResult {
        name: "floor".into(),
        passed: min_ratio >= 0.2 && (cos_ratio - closed).abs() <= 1e-3,
        detail: format!("key1d min ratio {min_ratio:.4}; cos1d ratio {cos_ratio:.6}"),
        data: serde_json::json!({ "key1d": rows, "cos1d": cos_ratio }),
    })
}
