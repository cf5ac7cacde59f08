//! One function per subcommand. Each fills the artifact set, prints a short
//! summary and returns whether its checks passed.

use std::sync::Arc;

use serde_json::json;

use oscillate::bench::{
    campanato_fit, homogenization_sweep, regularity_certificate, write_two_column, CertificateConfig, ExperimentReport,
    SweepConfig,
};
use oscillate::blayer::{solve_boundary_layer, BoundaryLayerProblem};
use oscillate::cell::{tabulate_effective, CellCache, CellMethod, CellOptions, CorrectorTable, EffectiveOperator, MatrixGrid};
use oscillate::operator::Operator;
use oscillate::solver::{solve_dirichlet_nested, DirichletProblem, SolverOptions};
use oscillate::{BoxGrid, GridFunction};

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::lemmas::{self, CheckContext};
use crate::CliError;

fn numerical(module: &'static str) -> impl Fn(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Numerical { module, message: e.to_string() }
}

fn cache(cfg: &RunConfig) -> CellCache {
    match &cfg.cache_dir {
        Some(dir) => CellCache::with_dir(dir),
        None => CellCache::new(),
    }
}

fn cell_options(cfg: &RunConfig, default_tol: f64) -> Result<CellOptions, CliError> {
    let mut opts = CellOptions::new(cfg.cell_resolution()).with_tol(cfg.tol(default_tol));
    if let Some(m) = &cfg.settings.method {
        opts = opts.with_method(m.parse::<CellMethod>().map_err(|e| cfg.error("method", e))?);
    }
    Ok(opts)
}

fn operator(cfg: &RunConfig) -> Arc<dyn Operator> {
    Arc::new(cfg.operator.clone())
}

fn grid_for(cfg: &RunConfig, epsilon: f64) -> Result<BoxGrid, CliError> {
    let n = match cfg.settings.resolution.filter(|_| cfg.settings.p.is_none()) {
        Some(n) => n,
        None => {
            let n = cfg.points_per_period() as f64 / epsilon;
            if (n - n.round()).abs() > 1e-9 {
                return Err(cfg.error("epsilons", format!("{epsilon} times the points per period is not an integer")));
            }
            n.round() as usize
        }
    };
    BoxGrid::unit(cfg.dim(), n).map_err(|e| cfg.error("resolution", e))
}

fn report_json(art: &mut Artifacts, report: &ExperimentReport, name: &str) -> Result<(), CliError> {
    art.json(name, report)
}

pub fn cell(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let opts = cell_options(cfg, 1e-9)?;
    let m = cfg.anchor();
    let cell = cache(cfg).get_or_solve(&cfg.operator, &m, &opts).map_err(|e| numerical("cell")(&e))?;
    println!("effective_value {:.5}", cell.effective_value);
    println!("residual {:.3e}", cell.residual);
    println!("iterations {}", cell.iterations);
    art.json("cell.json", cell.as_ref())?;
    art.csv("corrector.csv", |w| cell.corrector.write_csv(w))?;
    Ok(true)
}

pub fn effective(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let opts = cell_options(cfg, 1e-8)?;
    let (lo, hi) = (cfg.settings.lower.unwrap_or(-2.0), cfg.settings.upper.unwrap_or(2.0));
    let grid = MatrixGrid::uniform(cfg.dim(), lo, hi, cfg.settings.step.unwrap_or(1.0)).map_err(|e| cfg.error("step", e))?;
    let table = tabulate_effective(&cfg.operator, &grid, &opts, &cache(cfg)).map_err(|e| numerical("effective")(&e))?;
    println!("entries {}", table.entries.len());
    let worst = table.entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    println!("max_residual {worst:.3e}");
    art.csv("effective.csv", |w| table.write_csv(w))?;
    art.add("effective.json", format!("{}\n", table.to_json()).into_bytes());
    Ok(true)
}

pub fn check(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let requested = cfg.settings.lemma.clone().unwrap_or_else(|| vec!["all".into()]);
    let names: Vec<&str> = if requested.iter().any(|l| l == "all") {
        lemmas::NAMES.to_vec()
    } else {
        lemmas::NAMES.iter().copied().filter(|n| requested.iter().any(|r| r == n)).collect()
    };
    let cache = cache(cfg);
    let ctx = CheckContext {
        spec: cfg.settings.spec.as_ref().map(|_| &cfg.operator),
        tol: cfg.tol(1e-8),
        samples: cfg.settings.samples.unwrap_or(100),
        seed: cfg.seed(),
        cache: &cache,
    };
    let mut results = Vec::new();
    for name in names {
        let r = lemmas::run(name, &ctx).map_err(|e| numerical("check")(&e))?;
        println!("{}={} {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        results.push(r);
    }
    let mut report = ExperimentReport::new("check", &results).map_err(|e| numerical("check")(&e))?;
    for r in &results {
        report.flag(r.name.clone(), r.passed);
    }
    report_json(art, &report, "check.json")?;
    Ok(report.passed())
}

pub fn solve(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let eps = cfg.epsilons(&[0.125])[0];
    let grid = grid_for(cfg, eps)?;
    let (rhs, boundary) = (cfg.rhs(1.0), cfg.boundary());
    let problem = DirichletProblem::from_fns(operator(cfg), eps, grid, |x| rhs.eval(x), |x| boundary.eval(x))
        .map_err(|e| numerical("solver")(&e))?;
    let opts = SolverOptions { tol: cfg.tol(1e-8), ..SolverOptions::default() };
    let (u, report) = solve_dirichlet_nested(&problem, &opts).map_err(|e| numerical("solver")(&e))?;
    println!("sup_norm {:.6e}", u.sup_norm());
    println!("residual {:.3e}", report.residual);
    println!("iterations {}", report.iterations);
    art.csv("solution.csv", |w| u.write_csv(w))?;
    art.json(
        "solve.json",
        &json!({ "epsilon": eps, "intervals": grid.intervals()[0], "sup_norm": u.sup_norm(), "report": report }),
    )?;
    Ok(true)
}

pub fn blayer(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let m = cfg.anchor();
    let ppp = cfg.points_per_period();
    let cell = cache(cfg)
        .get_or_solve(&cfg.operator, &m, &CellOptions::new(ppp).with_tol(cfg.tol(1e-11)))
        .map_err(|e| numerical("blayer")(&e))?;
    let epsilons = cfg.epsilons(&[0.125, 0.0625, 0.03125]);
    let mut rows = Vec::new();
    let mut scaled = Vec::new();
    for (k, &eps) in epsilons.iter().enumerate() {
        let grid = grid_for(cfg, eps)?;
        let problem = BoundaryLayerProblem::new(operator(cfg), m, cell.clone(), eps, grid)
            .map_err(|e| numerical("blayer")(&e))?;
        let sol = solve_boundary_layer(&problem, cfg.tol(1e-11)).map_err(|e| numerical("blayer")(&e))?;
        let s = sol.sup_abs / (eps * eps);
        println!("epsilon {eps} sup_over_eps2 {s:.6e}");
        scaled.push(s);
        art.csv(&format!("zeta-{k}.csv"), |w| sol.zeta.write_csv(w))?;
        art.csv(&format!("decay-{k}.csv"), |w| sol.profile.write_csv(w))?;
        rows.push(json!({ "epsilon": eps, "sup_abs": sol.sup_abs, "sup_over_eps2": s, "boundary_sup": sol.boundary_sup, "profile": sol.profile }));
    }
    let stable = oscillate::bench::within_factor_two(&scaled);
    let mut report = ExperimentReport::new("blayer", &rows).map_err(|e| numerical("blayer")(&e))?;
    if scaled.len() > 1 {
        report.flag("eps2_scaling", stable);
        println!("eps2_scaling={}", if stable { "PASS" } else { "FAIL" });
    }
    report_json(art, &report, "blayer.json")?;
    Ok(report.passed())
}

pub fn sweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let name = cfg.operator.name.clone();
    let mut sc = if cfg.dim() == 1 { SweepConfig::model_1d(&name) } else { SweepConfig::model_2d(&name) };
    if let Some(e) = &cfg.settings.epsilons {
        sc.epsilons = e.clone();
    }
    sc.points_per_period = cfg.points_per_period();
    sc.cell_resolution = cfg.settings.resolution.unwrap_or(sc.cell_resolution);
    sc.tol = cfg.tol(sc.tol);
    sc.rhs = cfg.rhs(match sc.rhs {
        oscillate::bench::Field::Constant { value } => value,
        _ => 1.0,
    });
    sc.boundary = cfg.boundary();
    sc.effective_step = cfg.settings.step.unwrap_or(sc.effective_step);
    sc.validate().map_err(|e| cfg.error("epsilons", e))?;
    let out = homogenization_sweep(operator(cfg), &sc).map_err(|e| numerical("sweep")(&e))?;
    for row in &out.rows {
        println!("epsilon {} error {:.6e} ratio {}", row.epsilon, row.error, row.ratio.map_or("-".into(), |r| format!("{r:.3}")));
    }
    let pairs: Vec<(f64, f64)> = out.rows.iter().map(|r| (r.epsilon, r.error)).collect();
    art.csv("sweep.csv", |w| write_two_column(w, ["epsilon", "error"], &pairs))?;
    let mut report = ExperimentReport::new(
        "sweep",
        json!({ "config": out.config, "rows": out.rows, "rate": out.rate, "effective_report": out.effective_report }),
    )
    .map_err(|e| numerical("sweep")(&e))?;
    report.flag("monotone", out.monotone);
    println!("monotone={}", if out.monotone { "PASS" } else { "FAIL" });
    report_json(art, &report, "sweep.json")?;
    Ok(report.passed())
}

pub fn campanato(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let eps = cfg.epsilons(&[1.0 / 128.0])[0];
    let (mu, depth) = (cfg.settings.mu.unwrap_or(0.5), cfg.settings.depth.unwrap_or(4));
    let grid = grid_for(cfg, eps)?;
    let (rhs, boundary) = (cfg.rhs(1.0), cfg.boundary());
    let problem = DirichletProblem::from_fns(operator(cfg), eps, grid, |x| rhs.eval(x), |x| boundary.eval(x))
        .map_err(|e| numerical("solver")(&e))?;
    let opts = SolverOptions { tol: cfg.tol(1e-10), ..SolverOptions::default() };
    let (u, _) = solve_dirichlet_nested(&problem, &opts).map_err(|e| numerical("solver")(&e))?;
    let cell = CellOptions::new(cfg.points_per_period()).with_tol(cfg.tol(1e-10));
    let step = cfg.settings.step.unwrap_or(0.25);
    let range = if cfg.dim() == 1 { (-8.0, 8.0) } else { (-16.0, 16.0) };
    let fbar = EffectiveOperator::new(operator(cfg), cell, step).map_err(|e| numerical("campanato")(&e))?;
    let table = CorrectorTable::new(operator(cfg), cell, step, range).map_err(|e| numerical("campanato")(&e))?;
    let center = cfg.center();
    let fit = campanato_fit(&u, center, mu, depth, &fbar, &table, eps, rhs.eval(center))
        .map_err(|e| numerical("campanato")(&e))?;
    for l in &fit.levels {
        println!(
            "level {} radius {:.4e} remainder {:.4e} ratio {}",
            l.k,
            l.radius,
            l.remainder,
            l.ratio.map_or("-".into(), |r| format!("{r:.4}"))
        );
    }
    let bound = 1.5 * mu * mu;
    let contraction = fit.levels.iter().all(|l| l.exact) || fit.max_resolved_ratio().is_some_and(|r| r <= bound);
    println!("contraction={}", if contraction { "PASS" } else { "FAIL" });
    let mut report = ExperimentReport::new("campanato", &fit).map_err(|e| numerical("campanato")(&e))?;
    report.flag("contraction", contraction);
    report_json(art, &report, "campanato.json")?;
    Ok(report.passed())
}

pub fn certify(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool, CliError> {
    let default: &[f64] = if cfg.dim() == 1 { &[0.125, 0.0625, 0.03125, 0.015625] } else { &[0.125, 0.0625, 0.03125] };
    let epsilons = cfg.epsilons(default);
    let (rhs, boundary) = (cfg.rhs(if cfg.dim() == 1 { 1.0 } else { 10.0 }), cfg.boundary());
    let opts = SolverOptions { tol: cfg.tol(1e-8), ..SolverOptions::default() };
    let mut solutions: Vec<(f64, GridFunction)> = Vec::new();
    for &eps in &epsilons {
        let grid = grid_for(cfg, eps)?;
        let problem = DirichletProblem::from_fns(operator(cfg), eps, grid, |x| rhs.eval(x), |x| boundary.eval(x))
            .map_err(|e| numerical("solver")(&e))?;
        solutions.push((eps, solve_dirichlet_nested(&problem, &opts).map_err(|e| numerical("solver")(&e))?.0));
    }
    let mut config = CertificateConfig::default_for(cfg.dim());
    config.alpha = cfg.settings.alpha.unwrap_or(config.alpha);
    let cert = regularity_certificate(&solutions, &config).map_err(|e| numerical("certify")(&e))?;
    for c in &cert.centers {
        println!(
            "{:?} center ({:.4}, {:.4}) max_over_min {:.4} {}",
            c.kind,
            c.center[0],
            c.center[1],
            c.max_over_min,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    let mut report = ExperimentReport::new("certify", &cert).map_err(|e| numerical("certify")(&e))?;
    report.flag("certificate", cert.passed);
    println!("certificate={}", if cert.passed { "PASS" } else { "FAIL" });
    report_json(art, &report, "certificate.json")?;
    Ok(report.passed())
}
