use std::sync::Arc;

use oscillate::bench::{
    campanato_fit, homogenization_sweep, inject, project_onto_level_set, regularity_certificate, CenterKind,
    CertificateConfig, ExperimentReport, Field, SweepConfig, EXACT_FLOOR,
};
use oscillate::cell::{CellOptions, CorrectorTable, EffectiveOperator};
use oscillate::operator::{builtin, Operator};
use oscillate::solver::{solve_dirichlet_nested, DirichletProblem, SolverOptions};
use oscillate::{BoxGrid, GridFunction, SymMatrix};

fn op(name: &str) -> Arc<dyn Operator> {
    Arc::new(builtin(name).unwrap())
}

#[test]
fn one_dimensional_sweep_converges_and_correction_helps() {
    let mut cfg = SweepConfig::model_1d("cos1d");
    cfg.epsilons = vec![0.125, 0.0625, 0.03125];
    let out = homogenization_sweep(op("cos1d"), &cfg).unwrap();
    assert!(out.monotone);
    for row in &out.rows[1..] {
        assert!(row.ratio.unwrap() >= 1.5, "{:?}", row.ratio);
    }
    for row in &out.rows {
        assert!(row.corrected_interior.unwrap() < row.raw_interior.unwrap());
    }
    assert_eq!(out.solutions.len(), 3);
}

#[test]
fn sweep_configs_are_validated() {
    let mut cfg = SweepConfig::model_1d("cos1d");
    cfg.epsilons = vec![0.3];
    assert!(homogenization_sweep(op("cos1d"), &cfg).is_err());
    cfg.epsilons = vec![];
    assert!(cfg.validate().is_err());
    let cfg = SweepConfig::model_2d("separable2d");
    assert_eq!(cfg.resolution(0.125).unwrap(), 64);
    assert_eq!(cfg.finest_resolution().unwrap(), 256);
}

#[test]
fn injection_picks_coincident_nodes() {
    let fine = GridFunction::from_fn(BoxGrid::unit(2, 8).unwrap(), |x| x[0] + 10.0 * x[1]);
    let coarse = inject(&fine, BoxGrid::unit(2, 4).unwrap()).unwrap();
    let g = *coarse.grid();
    for k in 0..g.len() {
        let x = g.point(k);
        assert!((coarse.value(k) - (x[0] + 10.0 * x[1])).abs() < 1e-14);
    }
    assert!(inject(&fine, BoxGrid::unit(2, 3).unwrap()).is_err());
}

#[test]
fn projection_lands_on_the_level_set() {
    let fbar = EffectiveOperator::new(op("separable2d"), CellOptions::new(8).with_tol(1e-10), 0.5).unwrap();
    let m = SymMatrix::new2(0.3, -1.0, 0.2);
    let p = project_onto_level_set(&fbar, &m, 5.0).unwrap();
    assert!((fbar.value(&p, [0.0, 0.0]) - 5.0).abs() < 1e-9);
    let shift = p.m11() - m.m11();
    assert!((p.m22() - m.m22() - shift).abs() < 1e-12 && p.m12() == m.m12());
}

#[test]
fn campanato_remainders_contract_on_the_linear_model() {
    let eps = 1.0 / 128.0;
    let res = 32;
    let base = op("cos1d");
    let cell = CellOptions::new(res).with_tol(1e-10);
    let fbar = EffectiveOperator::new(base.clone(), cell, 0.25).unwrap();
    let table = CorrectorTable::new(base.clone(), cell, 0.25, (-8.0, 8.0)).unwrap();
    let grid = BoxGrid::unit(1, res * 128).unwrap();
    let p = DirichletProblem::from_fns(base, eps, grid, |x| 1.0 + x[0], |_| 0.0).unwrap();
    let (u, _) = solve_dirichlet_nested(&p, &SolverOptions { tol: 1e-10, ..SolverOptions::default() }).unwrap();
    let fit = campanato_fit(&u, [0.5, 0.0], 0.5, 4, &fbar, &table, eps, 1.5).unwrap();
    assert_eq!(fit.levels.len(), 5);
    for level in &fit.levels {
        assert!(level.constraint_defect < 1e-9);
        assert!(level.remainder > EXACT_FLOOR);
    }
    let worst = fit.max_resolved_ratio().unwrap();
    assert!(worst <= 1.5 * 0.25, "{worst}");
}

#[test]
fn certificates_on_a_y_independent_operator_are_uniform() {
    let spec = op("pucci2d");
    let solutions: Vec<(f64, GridFunction)> = [0.125, 0.0625]
        .iter()
        .map(|&eps| {
            let grid = BoxGrid::unit(2, 32).unwrap();
            let p = DirichletProblem::from_fns(spec.clone(), eps, grid, |_| 10.0, |_| 0.0).unwrap();
            (eps, solve_dirichlet_nested(&p, &SolverOptions::default()).unwrap().0)
        })
        .collect();
    let report = regularity_certificate(&solutions, &CertificateConfig::default_for(2)).unwrap();
    assert!(report.passed);
    let kinds = |k: CenterKind| report.centers.iter().filter(|c| c.kind == k).count();
    assert_eq!((kinds(CenterKind::Holder), kinds(CenterKind::Hessian), kinds(CenterKind::Boundary)), (5, 5, 3));
    for c in report.centers.iter().filter(|c| c.kind == CenterKind::Holder) {
        // identical solutions, identical quotients except for the exclusion ball
        assert!(c.max_over_min < 1.5);
    }
}

#[test]
fn fields_and_reports_round_trip() {
    let f = Field::Polynomial { value: 1.0, gradient: [2.0, 0.0], hessian: [0.0, 0.0, 1.0] };
    assert_eq!(f.eval([0.5, 2.0]), 1.0 + 1.0 + 1.0);
    let text = serde_json::to_string(&f).unwrap();
    assert_eq!(serde_json::from_str::<Field>(&text).unwrap(), f);
    let mut report = ExperimentReport::new("sweep", &f).unwrap();
    report.flag("monotone", true);
    assert!(report.passed());
    assert!(!report.to_json().unwrap().contains("time"));
}
