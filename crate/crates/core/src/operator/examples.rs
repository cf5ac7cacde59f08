//! Built-in operators and the min{concave, convex} constructors.

use std::f64::consts::{PI, SQRT_2};

use super::spec::{Node, OperatorSpec};
use super::trig::{CoefficientField, TrigPoly};
use super::OperatorError;

/// Names accepted by [`builtin`] that denote operators with zero source term.
pub fn builtin_names() -> &'static [&'static str] {
    &["cos1d", "sin1d", "mincossin1d", "key1d", "separable2d", "key2d", "pucci2d"]
}

fn cos_coeff(shift: f64, amp: f64) -> TrigPoly {
    TrigPoly::constant(shift).with_cos([1, 0], amp)
}

/// Looks up a built-in operator; `key1d_concave` style names return operands.
pub fn builtin(name: &str) -> Result<OperatorSpec, OperatorError> {
    let linear1d = |name: &str, a: TrigPoly| OperatorSpec::new(name, 1, 1.0, 3.0, Node::linear(CoefficientField::scalar(a)));
    match name {
        "cos1d" => linear1d("cos1d", cos_coeff(2.0, 1.0)),
        "sin1d" => linear1d("sin1d", TrigPoly::constant(2.0).with_sin([1, 0], 1.0)),
        "mincossin1d" => {
            let cos = builtin("cos1d")?;
            let sin = builtin("sin1d")?;
            let mut spec = OperatorSpec::combine("mincossin1d", "min", &[&cos, &sin])?;
            spec.name = "mincossin1d".into();
            Ok(spec)
        }
        "separable2d" => OperatorSpec::new(
            "separable2d",
            2,
            1.0,
            3.0 * SQRT_2,
            Node::linear(CoefficientField::diagonal(
                cos_coeff(2.0, 1.0),
                TrigPoly::constant(2.0).with_cos([0, 1], 1.0),
            )),
        ),
        "pucci2d" => OperatorSpec::new("pucci2d", 2, 1.0, 2.0 * SQRT_2, Node::PucciMinus { lower: 1.0, upper: 2.0, shift: 0.0 }),
        "key1d" | "key1d_concave" | "key1d_convex" => {
            let ex = build_key_example(1.0, 1, 1.0, 6.0)?;
            Ok(match name {
                "key1d" => ex.combined,
                "key1d_concave" => ex.concave,
                _ => ex.convex,
            })
        }
        "key2d" | "key2d_concave" | "key2d_convex" => {
            let ex = build_key_example(1.0, 2, 1.35, 5.9 * SQRT_2)?;
            Ok(match name {
                "key2d" => ex.combined,
                "key2d_concave" => ex.concave,
                _ => ex.convex,
            })
        }
        other => Err(OperatorError::Argument(format!("unknown built-in operator {other}"))),
    }
}

fn leaf_shape_ok(node: &Node, concave: bool) -> bool {
    let pucci_ok = |n: &Node| match n {
        Node::PucciMinus { .. } => concave,
        Node::PucciPlus { .. } => !concave,
        _ => false,
    };
    match node {
        Node::Linear { .. } => true,
        Node::Min { children } if concave => children.iter().all(|c| c.is_linear_leaf() || pucci_ok(c)),
        Node::Max { children } if !concave => children.iter().all(|c| c.is_linear_leaf() || pucci_ok(c)),
        other => pucci_ok(other),
    }
}

/// `MIN(concave, convex)` with zero source term verified.
pub fn build_cabre_caffarelli(concave: &OperatorSpec, convex: &OperatorSpec) -> Result<OperatorSpec, OperatorError> {
    if !leaf_shape_ok(&concave.root, true) {
        return Err(OperatorError::Argument("concave operand must be a MIN of linear (or Pucci-minimal) leaves".into()));
    }
    if !leaf_shape_ok(&convex.root, false) {
        return Err(OperatorError::Argument("convex operand must be a MAX of linear (or Pucci-maximal) leaves".into()));
    }
    if concave.dim != convex.dim {
        return Err(OperatorError::Argument("operand dimensions differ".into()));
    }
    if (concave.lambda - convex.lambda).abs() > 1e-12 || (concave.big_lambda - convex.big_lambda).abs() > 1e-12 {
        return Err(OperatorError::Argument("operands must share (lambda, Lambda)".into()));
    }
    let name = format!("min({},{})", concave.name, convex.name);
    let mut spec = OperatorSpec::combine(&name, "min", &[concave, convex])?;
    spec.zero_source = true;
    spec.validate()?;
    Ok(spec)
}

/// A concave/convex pair with `y`-independence on a ball and a separated
/// gap outside it, plus their minimum.
#[derive(Clone, Debug)]
pub struct KeyExample {
    pub concave: OperatorSpec,
    pub convex: OperatorSpec,
    pub combined: OperatorSpec,
    /// Radius beyond which the gap condition holds.
    pub r: f64,
    /// Both operands are `y`-independent for `|M| <= gate`.
    pub gate: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Constant shift of the concave operand.
    pub shift: f64,
}

/// Gate radius as a multiple of `R`.
pub const KEY_GATE_FACTOR: f64 = 2.0;

/// Builds the key example for spectral band `[lambda, Lambda / sqrt(n)]`.
///
/// Each operand mixes `y`-independent leaves with gated leaves of the form
/// `a(y) t + (c - a(y)) t0` (`t = M` in 1-D, `tr M` in 2-D) that can only
/// become active once `|M|` exceeds the gate.
pub fn build_key_example(r: f64, dim: usize, lambda: f64, big_lambda: f64) -> Result<KeyExample, OperatorError> {
    if !(r > 0.0) {
        return Err(OperatorError::Construction(format!("R = {r} must be positive")));
    }
    if !(lambda > 0.0 && big_lambda > lambda) {
        return Err(OperatorError::Construction(format!("band [{lambda}, {big_lambda}] is empty")));
    }
    let gate = KEY_GATE_FACTOR * r;
    match dim {
        1 => key_1d(r, gate, lambda, big_lambda),
        2 => key_2d(r, gate, lambda, big_lambda),
        d => Err(OperatorError::UnsupportedDim(d)),
    }
}

fn gated_leaf(dim: usize, mid: f64, amp: f64, slope_ref: f64, sign: f64, t0: f64) -> Node {
    // a(y) t + sign (slope_ref - a(y)) t0  =  a(y) (t - sign t0) + sign slope_ref t0
    let a = match dim {
        1 => TrigPoly::constant(mid).with_cos([1, 0], amp),
        _ => TrigPoly::constant(mid).with_cos([1, 0], 0.5 * amp).with_cos([0, 1], 0.5 * amp),
    };
    let offset = TrigPoly {
        constant: sign * (slope_ref - mid) * t0,
        terms: a.terms.iter().map(|t| super::trig::TrigTerm { freq: t.freq, cos: -sign * t.cos * t0, sin: 0.0 }).collect(),
    };
    let coefficients = match dim {
        1 => CoefficientField::scalar(a),
        _ => CoefficientField::isotropic(a),
    };
    Node::affine(coefficients, offset)
}

fn const_leaf(dim: usize, slope: f64, offset: f64) -> Node {
    let coefficients = match dim {
        1 => CoefficientField::scalar(TrigPoly::constant(slope)),
        _ => CoefficientField::isotropic(TrigPoly::constant(slope)),
    };
    Node::affine(coefficients, TrigPoly::constant(offset))
}

fn key_1d(r: f64, gate: f64, lambda: f64, big_lambda: f64) -> Result<KeyExample, OperatorError> {
    let w = big_lambda - lambda;
    let at = |t: f64| lambda + t * w;
    let amp = 0.04 * w;
    let shift = 0.1 * w * r;
    let (lo, hi) = (at(0.2), at(0.8));
    let (cv_lo, cv_hi) = (at(0.2), at(0.6));
    // concave: shift + min(hi M, lo M, a3(y)(M - T0) + lo T0, a4(y)(M + T0) - hi T0)
    let concave_root = Node::Min {
        children: vec![
            const_leaf(1, hi, shift),
            const_leaf(1, lo, shift),
            add_offset(gated_leaf(1, at(0.1), amp, lo, 1.0, gate), shift),
            add_offset(gated_leaf(1, at(0.9), amp, hi, -1.0, gate), shift),
        ],
    };
    // convex: max(lo M, hi M, b3(y)(M - T0) + hi T0, b4(y)(M + T0) - lo T0)
    let convex_root = Node::Max {
        children: vec![
            const_leaf(1, cv_lo, 0.0),
            const_leaf(1, cv_hi, 0.0),
            gated_leaf(1, at(0.7), amp, cv_hi, 1.0, gate),
            gated_leaf(1, at(0.1), amp, cv_lo, -1.0, gate),
        ],
    };
    let kappa = 2.0 * PI * amp;
    let gap_slope = (cv_hi - lo).min(hi - cv_lo);
    if gap_slope * r - shift < kappa * r {
        return Err(OperatorError::Construction("gap cannot dominate the Hölder modulus".into()));
    }
    finish(r, gate, 1, lambda, big_lambda, concave_root, convex_root, kappa, shift, "key1d")
}

fn key_2d(r: f64, gate: f64, lambda: f64, big_lambda: f64) -> Result<KeyExample, OperatorError> {
    let spectral = big_lambda / SQRT_2;
    let w = spectral - lambda;
    if w <= 0.0 {
        return Err(OperatorError::Construction(format!("spectral band [{lambda}, {spectral}] is empty")));
    }
    let at = |t: f64| lambda + t * w;
    let amp = 0.033 * w;
    let (p1, p2) = (at(0.143), at(0.8));
    let (q1, q2) = (at(0.033), at(0.912));
    for (lo, hi) in [(p1, p2), (q1, q2)] {
        if hi / lo > super::PUCCI_MAX_RATIO {
            return Err(OperatorError::Construction(format!(
                "Pucci band [{lo:.3}, {hi:.3}] too wide for a monotone 9-point scheme; raise lambda relative to Lambda"
            )));
        }
    }
    let kappa = 2.0 * PI * amp;
    let gap_slope = (q2 - p1).min(p2 - q1);
    let shift = 0.2 * w * r;
    if gap_slope * r - shift < kappa * SQRT_2 * r {
        return Err(OperatorError::Construction("gap cannot dominate the Hölder modulus".into()));
    }
    let t0 = SQRT_2 * gate;
    let concave_root = Node::Min {
        children: vec![
            Node::PucciMinus { lower: p1, upper: p2, shift: 0.0 },
            gated_leaf(2, at(0.033), amp, p1, 1.0, t0),
        ],
    };
    let convex_root = Node::Max {
        children: vec![
            Node::PucciPlus { lower: q1, upper: q2, shift: 0.0 },
            gated_leaf(2, at(0.967), amp, q2, 1.0, t0),
        ],
    };
    let concave_root = add_offset(concave_root, shift);
    finish(r, gate, 2, lambda, big_lambda, concave_root, convex_root, kappa, shift, "key2d")
}

fn add_offset(node: Node, c: f64) -> Node {
    match node {
        Node::Linear { coefficients, mut offset } => {
            offset.constant += c;
            Node::Linear { coefficients, offset }
        }
        Node::PucciMinus { lower, upper, shift } => Node::PucciMinus { lower, upper, shift: shift + c },
        Node::PucciPlus { lower, upper, shift } => Node::PucciPlus { lower, upper, shift: shift + c },
        Node::Min { children } => Node::Min { children: children.into_iter().map(|n| add_offset(n, c)).collect() },
        Node::Max { children } => Node::Max { children: children.into_iter().map(|n| add_offset(n, c)).collect() },
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    r: f64,
    gate: f64,
    dim: usize,
    lambda: f64,
    big_lambda: f64,
    concave_root: Node,
    convex_root: Node,
    kappa: f64,
    shift: f64,
    name: &str,
) -> Result<KeyExample, OperatorError> {
    let concave = OperatorSpec::operand(&format!("{name}_concave"), dim, lambda, big_lambda, concave_root)?
        .with_holder(kappa, 1.0);
    let convex = OperatorSpec::operand(&format!("{name}_convex"), dim, lambda, big_lambda, convex_root)?
        .with_holder(kappa, 1.0);
    let mut combined = build_cabre_caffarelli(&concave, &convex)?;
    combined.name = name.to_string();
    combined.kappa = kappa;
    combined.gamma = 1.0;
    Ok(KeyExample { concave, convex, combined, r, gate, kappa, gamma: 1.0, shift })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates() {
        for name in builtin_names().iter().chain(&["key1d_concave", "key1d_convex", "key2d_concave", "key2d_convex"]) {
            let spec = builtin(name).unwrap();
            spec.validate().unwrap();
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn key_example_constructor_checks_arguments() {
        assert!(build_key_example(0.0, 1, 1.0, 6.0).is_err());
        assert!(build_key_example(1.0, 1, 2.0, 1.0).is_err());
        assert!(build_key_example(1.0, 3, 1.0, 6.0).is_err());
        let ex = build_key_example(1.0, 1, 1.0, 6.0).unwrap();
        assert_eq!(ex.gate, KEY_GATE_FACTOR);
    }

    #[test]
    fn operand_shapes_are_enforced() {
        let concave = builtin("key1d_concave").unwrap();
        let convex = builtin("key1d_convex").unwrap();
        assert!(build_cabre_caffarelli(&concave, &convex).is_ok());
        assert!(build_cabre_caffarelli(&convex, &concave).is_err());
        assert!(build_cabre_caffarelli(&concave, &builtin("key2d_convex").unwrap()).is_err());
    }
}
