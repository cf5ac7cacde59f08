//! Sampling diagnostics for ellipticity and Hölder continuity in `y`.
//!
//! Both use a ChaCha8 stream seeded with [`DIAGNOSTIC_SEED`], so repeated
//! calls return identical estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Operator, OperatorError};
use crate::grid::Point;
use crate::matrix::SymMatrix;

pub const DIAGNOSTIC_SEED: u64 = 0x05C1_11A7;

/// Minimum sample count accepted by [`ellipticity_margin`].
pub const MIN_ELLIPTICITY_SAMPLES: usize = 100;

fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> SymMatrix {
    match dim {
        1 => SymMatrix::scalar(rng.gen_range(-scale..scale)),
        _ => SymMatrix::new2(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)),
    }
}

/// Random positive semidefinite matrix with unit Frobenius norm. Every fourth
/// draw is rank one so the lower extreme is probed.
fn random_psd_unit(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> SymMatrix {
    if dim == 1 {
        return SymMatrix::scalar(1.0);
    }
    let angle = |rng: &mut ChaCha8Rng| {
        let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        [t.cos(), t.sin()]
    };
    let mut n = SymMatrix::outer(2, angle(rng));
    if !k.is_multiple_of(4) {
        let w: f64 = rng.gen_range(0.0..1.0);
        n = n + SymMatrix::outer(2, angle(rng)) * w;
    }
    let norm = n.norm();
    n * (1.0 / norm)
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    match dim {
        1 => [rng.gen_range(0.0..1.0), 0.0],
        _ => [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
    }
}

/// Observed extremes of `F(M + N, y) - F(M, y)` over random `M`, unit PSD
/// `N` and `y`.
pub fn ellipticity_margin(op: &dyn Operator, samples: usize) -> Result<(f64, f64), OperatorError> {
    if samples < MIN_ELLIPTICITY_SAMPLES {
        return Err(OperatorError::TooFewSamples { got: samples, min: MIN_ELLIPTICITY_SAMPLES });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DIAGNOSTIC_SEED);
    let dim = op.dim();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..samples {
        let m = random_symmetric(&mut rng, dim, 3.0);
        let n = random_psd_unit(&mut rng, dim, k);
        let y = random_point(&mut rng, dim);
        let q = op.value(&(m + n), y) - op.value(&m, y);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    if lo <= 0.0 {
        return Err(OperatorError::Degenerate(lo));
    }
    Ok((lo, hi))
}

/// Empirical sup of `|F(M, y1) - F(M, y2)| / (|M| |y1 - y2|^gamma)`.
///
/// Half of the pairs are close (`|y1 - y2| <= 1e-3`) to probe the local
/// modulus.
pub fn holder_modulus(op: &dyn Operator, gamma: f64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(DIAGNOSTIC_SEED ^ 0x9E37);
    let dim = op.dim();
    let mut sup: f64 = 0.0;
    for k in 0..samples {
        let m = random_symmetric(&mut rng, dim, 3.0);
        let norm = m.norm();
        if norm < 1e-9 {
            continue;
        }
        let y1 = random_point(&mut rng, dim);
        let y2 = if k % 2 == 0 {
            let d = random_point(&mut rng, dim);
            [y1[0] + 1e-3 * (d[0] - 0.5), y1[1] + if dim == 2 { 1e-3 * (d[1] - 0.5) } else { 0.0 }]
        } else {
            random_point(&mut rng, dim)
        };
        let dist = (y1[0] - y2[0]).hypot(y1[1] - y2[1]);
        if dist < 1e-12 {
            continue;
        }
        let q = (op.value(&m, y1) - op.value(&m, y2)).abs() / (norm * dist.powf(gamma));
        sup = sup.max(q);
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::builtin;

    #[test]
    fn linear_margins_lie_in_the_coefficient_range() {
        let (lo, hi) = ellipticity_margin(&builtin("cos1d").unwrap(), MIN_ELLIPTICITY_SAMPLES).unwrap();
        assert!(lo >= 1.0 - 1e-12 && hi <= 3.0 + 1e-12);
        assert!(ellipticity_margin(&builtin("cos1d").unwrap(), 5).is_err());
    }

    #[test]
    fn y_independent_operators_have_zero_modulus() {
        assert_eq!(holder_modulus(&builtin("pucci2d").unwrap(), 1.0, 200), 0.0);
        assert!(holder_modulus(&builtin("cos1d").unwrap(), 1.0, 200) > 0.0);
    }
}
