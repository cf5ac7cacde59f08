use std::sync::Arc;

use oscillate::blayer::{solve_boundary_layer, BoundaryLayerProblem, DecayProfile};
use oscillate::cell::{solve_cell, CellOptions};
use oscillate::operator::{builtin, Operator};
use oscillate::{BoxGrid, SymMatrix};

fn layer(name: &str, m: SymMatrix, eps: f64, points_per_period: usize) -> oscillate::blayer::BoundaryLayerSolution {
    let spec = builtin(name).unwrap();
    let cell = Arc::new(solve_cell(&spec, &m, &CellOptions::new(points_per_period).with_tol(1e-11)).unwrap());
    let n = (points_per_period as f64 / eps).round() as usize;
    let op: Arc<dyn Operator> = Arc::new(spec.clone());
    let problem = BoundaryLayerProblem::new(op, m, cell, eps, BoxGrid::unit(spec.dim, n).unwrap()).unwrap();
    solve_boundary_layer(&problem, 1e-11).unwrap()
}

#[test]
fn one_dimensional_layer_is_affine_with_zero_hessian() {
    // aligned nodes make the cell equation hold exactly, so zeta solves zeta'' = 0
    for eps in [0.125, 0.0625] {
        let sol = layer("cos1d", SymMatrix::scalar(1.0), eps, 32);
        let grid = *sol.zeta.grid();
        let (z0, z1) = (sol.zeta.value(0), sol.zeta.value(grid.len() - 1));
        for k in 0..grid.len() {
            let x = grid.point(k)[0];
            assert!((sol.zeta.value(k) - (z0 + (z1 - z0) * x)).abs() < 1e-12);
        }
        assert!(sol.profile.bands.iter().all(|b| b.sup_hessian < 1e-8));
    }
}

#[test]
fn two_dimensional_layer_scales_like_epsilon_squared() {
    let m = SymMatrix::new2(1.0, 2.0, 0.5);
    let scaled: Vec<f64> = [0.125, 0.0625]
        .iter()
        .map(|&eps| {
            let sol = layer("separable2d", m, eps, 8);
            assert!(sol.sup_abs <= sol.boundary_sup + 1e-9);
            sol.sup_abs / (eps * eps)
        })
        .collect();
    let ratio = scaled[0].max(scaled[1]) / scaled[0].min(scaled[1]);
    assert!(ratio <= 2.0, "{scaled:?}");
}

#[test]
fn decay_profile_flags_interior_bands_and_writes_csv() {
    let sol = layer("separable2d", SymMatrix::new2(1.0, 2.0, 0.5), 0.0625, 8);
    let interior: Vec<u32> = sol.profile.bands.iter().filter(|b| b.interior).map(|b| b.band).collect();
    assert_eq!(interior, vec![2]);
    for b in &sol.profile.bands {
        assert!((b.ratio - b.sup_hessian * b.d_lo * b.d_lo / (0.0625 * 0.0625)).abs() < 1e-12);
    }
    let mut buf = Vec::new();
    sol.profile.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + sol.profile.bands.len() + sol.profile.lp.len());
    let json = serde_json::to_string(&sol.profile).unwrap();
    let back: DecayProfile = serde_json::from_str(&json).unwrap();
    assert_eq!(back.bands.len(), sol.profile.bands.len());
}

#[test]
fn mismatched_cells_and_underresolved_scales_are_rejected() {
    let spec = builtin("separable2d").unwrap();
    let m = SymMatrix::identity(2);
    let cell = Arc::new(solve_cell(&spec, &m, &CellOptions::new(8)).unwrap());
    let op: Arc<dyn Operator> = Arc::new(spec);
    let grid = BoxGrid::unit(2, 16).unwrap();
    assert!(BoundaryLayerProblem::new(op.clone(), SymMatrix::new2(1.0, 1.0, 0.1), cell.clone(), 0.25, grid).is_err());
    assert!(BoundaryLayerProblem::new(op, m, cell, 0.1, grid).is_err());
}
