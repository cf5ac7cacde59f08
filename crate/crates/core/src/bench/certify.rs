use serde::{Deserialize, Serialize};

use super::{within_factor_two, BenchError};
use crate::grid::{hessian_norm_field, holder_quotient, lp_norm, second_difference_sup, Affine, GridFunction, Point, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterKind {
    /// Best-affine Holder quotient with exclusion radius epsilon.
    Holder,
    /// Sup of the discrete Hessian outside the epsilon-ball.
    Hessian,
    /// `L^p` Hessian norm on a box touching the flat boundary.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateConfig {
    pub interior_centers: Vec<Point>,
    pub boundary_centers: Vec<Point>,
    pub alpha: f64,
    pub radius: f64,
    /// Half width of the boxes for interior Hessian sups; must exceed every epsilon.
    pub hessian_half_width: f64,
    /// Half width of the boxes for boundary norms.
    pub boundary_half_width: f64,
    pub lp_exponent: f64,
}

impl CertificateConfig {
    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            Self {
                interior_centers: [0.5, 0.375, 0.625, 0.4375, 0.5625].iter().map(|&x| [x, 0.0]).collect(),
                boundary_centers: vec![[0.0, 0.0]],
                alpha: 0.5,
                radius: 0.25,
                hessian_half_width: 0.25,
                boundary_half_width: 0.125,
                lp_exponent: 4.0,
            }
        } else {
            Self {
                interior_centers: vec![[0.5, 0.5], [0.375, 0.375], [0.625, 0.375], [0.375, 0.625], [0.625, 0.625]],
                boundary_centers: vec![[0.375, 0.0], [0.5, 0.0], [0.625, 0.0]],
                alpha: 0.5,
                radius: 0.25,
                hessian_half_width: 0.25,
                boundary_half_width: 0.125,
                lp_exponent: 4.0,
            }
        }
    }

    fn boundary_region(&self, dim: usize, c: Point) -> Region {
        let w = self.boundary_half_width;
        if dim == 1 {
            Region::Rect { lower: [c[0], 0.0], upper: [c[0] + 2.0 * w, 0.0] }
        } else {
            Region::Rect { lower: [c[0] - w, 0.0], upper: [c[0] + w, 2.0 * w] }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsilonCertificate {
    pub epsilon: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterCertificate {
    pub kind: CenterKind,
    pub center: Point,
    pub values: Vec<EpsilonCertificate>,
    pub max_over_min: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub config: CertificateConfig,
    pub centers: Vec<CenterCertificate>,
    pub passed: bool,
}

fn best_affine(u: &GridFunction, node: usize) -> Affine {
    let grid = u.grid();
    let h = grid.spacing();
    let mut gradient = [0.0; 2];
    for (a, g) in gradient.iter_mut().enumerate().take(grid.dim()) {
        let mut plus = [0i64; 2];
        plus[a] = 1;
        let minus = [-plus[0], -plus[1]];
        if let (Some(p), Some(m)) = (grid.neighbor(node, plus), grid.neighbor(node, minus)) {
            *g = (u.value(p) - u.value(m)) / (2.0 * h);
        }
    }
    Affine { value: u.value(node), gradient }
}

/// Holder quotients, outside-epsilon Hessian sups and boundary `L^p`
/// Hessian norms for every `(epsilon, u_eps)`, with the per-center rule
/// `max over epsilon <= 2 min over epsilon`.
pub fn regularity_certificate(
    solutions: &[(f64, GridFunction)],
    config: &CertificateConfig,
) -> Result<CertificateReport, BenchError> {
    if solutions.len() < 2 {
        return Err(BenchError::Config("certificates need at least two epsilons".into()));
    }
    let dim = solutions[0].1.grid().dim();
    if let Some((eps, _)) = solutions.iter().find(|(e, _)| *e >= config.hessian_half_width) {
        return Err(BenchError::Config(format!("epsilon {eps} leaves no nodes outside the exclusion ball")));
    }
    let mut families: Vec<(CenterKind, Point, Vec<EpsilonCertificate>)> = Vec::new();
    for &c in &config.interior_centers {
        families.push((CenterKind::Holder, c, Vec::new()));
        families.push((CenterKind::Hessian, c, Vec::new()));
    }
    for &c in &config.boundary_centers {
        families.push((CenterKind::Boundary, c, Vec::new()));
    }
    for (eps, u) in solutions {
        let grid = *u.grid();
        if grid.dim() != dim {
            return Err(BenchError::Config("solutions of mixed dimension".into()));
        }
        let hess = hessian_norm_field(u);
        for (kind, c, values) in families.iter_mut() {
            let value = match kind {
                CenterKind::Holder => {
                    let node = grid.nearest_node(*c);
                    let aff = best_affine(u, node);
                    holder_quotient(u, node, &aff, config.alpha, *eps, config.radius)?
                }
                CenterKind::Hessian => {
                    let w = config.hessian_half_width;
                    let region = Region::Rect { lower: [c[0] - w, c[1] - w], upper: [c[0] + w, c[1] + w] };
                    let node = grid.nearest_node(*c);
                    second_difference_sup(u, &[grid.point(node)], *eps, &region)?
                }
                CenterKind::Boundary => lp_norm(&hess, config.lp_exponent, &config.boundary_region(dim, *c))?,
            };
            values.push(EpsilonCertificate { epsilon: *eps, value });
        }
    }
    let centers: Vec<CenterCertificate> = families
        .into_iter()
        .map(|(kind, center, values)| {
            let v: Vec<f64> = values.iter().map(|e| e.value).collect();
            let max = v.iter().copied().fold(0.0, f64::max);
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let passed = v.iter().all(|x| x.is_finite()) && within_factor_two(&v);
            let max_over_min = if max == 0.0 { 1.0 } else { max / min };
            CenterCertificate { kind, center, values, max_over_min, passed }
        })
        .collect();
    let passed = centers.iter().all(|c| c.passed);
    Ok(CertificateReport { config: config.clone(), centers, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;

    #[test]
    fn affine_functions_are_exactly_fitted() {
        let u = GridFunction::from_fn(BoxGrid::unit(2, 16).unwrap(), |x| 1.0 + 2.0 * x[0] - 3.0 * x[1]);
        let node = u.grid().nearest_node([0.5, 0.5]);
        let a = best_affine(&u, node);
        assert!((a.gradient[0] - 2.0).abs() < 1e-12 && (a.gradient[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn inputs_are_validated() {
        let cfg = CertificateConfig::default_for(2);
        let u = GridFunction::zeros(BoxGrid::unit(2, 16).unwrap());
        assert!(regularity_certificate(&[(0.1, u.clone())], &cfg).is_err());
        assert!(regularity_certificate(&[(0.3, u.clone()), (0.1, u)], &cfg).is_err());
    }

    #[test]
    fn identical_smooth_solutions_pass() {
        let u = GridFunction::from_fn(BoxGrid::unit(2, 32).unwrap(), |x| (x[0] * x[0] + 2.0 * x[1] * x[1]) * 0.5);
        let report = regularity_certificate(&[(0.125, u.clone()), (0.0625, u)], &CertificateConfig::default_for(2)).unwrap();
        assert!(report.passed);
    }
}
