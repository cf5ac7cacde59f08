//! Min/max lattices over linear and Pucci leaves.


use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::trig::{CoefficientField, TrigPoly};
use super::{pucci_minus_argmin, pucci_value, ActiveLeaf, Operator, OperatorError, PUCCI_MAX_RATIO};
use crate::grid::Point;
use crate::matrix::SymMatrix;
use crate::stencil::{apply, SecondDiffs};

pub const SCHEMA_VERSION: u32 = 1;

/// Audit grid density for leaf checks, per axis.
pub const AUDIT_POINTS_PER_AXIS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `A(y) : M + b(y)`.
    Linear {
        coefficients: CoefficientField,
        #[serde(default, skip_serializing_if = "TrigPoly::is_zero")]
        offset: TrigPoly,
    },
    Min {
        children: Vec<Node>,
    },
    Max {
        children: Vec<Node>,
    },
    /// Pucci minimal operator plus a constant.
    PucciMinus {
        lower: f64,
        upper: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        shift: f64,
    },
    PucciPlus {
        lower: f64,
        upper: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        shift: f64,
    },
}

impl Node {
    pub fn linear(coefficients: CoefficientField) -> Self {
        Node::Linear { coefficients, offset: TrigPoly::default() }
    }

    pub fn affine(coefficients: CoefficientField, offset: TrigPoly) -> Self {
        Node::Linear { coefficients, offset }
    }

    pub fn value(&self, dim: usize, m: &SymMatrix, y: Point) -> f64 {
        match self {
            Node::Linear { coefficients, offset } => coefficients.eval(dim, y).contract(m) + offset.eval(y),
            Node::Min { children } => children.iter().map(|c| c.value(dim, m, y)).fold(f64::INFINITY, f64::min),
            Node::Max { children } => {
                children.iter().map(|c| c.value(dim, m, y)).fold(f64::NEG_INFINITY, f64::max)
            }
            Node::PucciMinus { lower, upper, shift } => pucci_value(m, *lower, *upper, false) + shift,
            Node::PucciPlus { lower, upper, shift } => pucci_value(m, *lower, *upper, true) + shift,
        }
    }

    /// Active leaf and its scheme value.
    pub fn active(&self, dim: usize, s: &SecondDiffs, y: Point) -> (ActiveLeaf, f64) {
        match self {
            Node::Linear { coefficients, offset } => {
                let a = coefficients.eval(dim, y);
                let b = offset.eval(y);
                (ActiveLeaf::from_matrix(&a, b), apply(&a, s) + b)
            }
            Node::Min { children } => select(children, dim, s, y, |v, best| v < best),
            Node::Max { children } => select(children, dim, s, y, |v, best| v > best),
            Node::PucciMinus { lower, upper, shift } => {
                let a = pucci_minus_argmin(s, *lower, *upper);
                (ActiveLeaf::from_matrix(&a, *shift), apply(&a, s) + shift)
            }
            Node::PucciPlus { lower, upper, shift } => {
                let a = pucci_minus_argmin(&s.scale(-1.0), *lower, *upper);
                (ActiveLeaf::from_matrix(&a, *shift), apply(&a, s) + shift)
            }
        }
    }

    pub fn max_frequency(&self) -> u32 {
        match self {
            Node::Linear { coefficients, offset } => coefficients.max_frequency().max(offset.max_frequency()),
            Node::Min { children } | Node::Max { children } => {
                children.iter().map(Node::max_frequency).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// Sum of Lipschitz bounds in `y` over leaves, per unit `|M|` and per unit offset.
    fn lipschitz_bounds(&self) -> (f64, f64) {
        match self {
            Node::Linear { coefficients, offset } => {
                let c = &coefficients;
                let coeff = c.a11.lipschitz_bound()
                    + c.a22.lipschitz_bound()
                    + 2.0 * c.a12.lipschitz_bound();
                (coeff, offset.lipschitz_bound())
            }
            Node::Min { children } | Node::Max { children } => children
                .iter()
                .map(Node::lipschitz_bounds)
                .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))),
            _ => (0.0, 0.0),
        }
    }

    fn visit<'a>(&'a self, path: String, f: &mut dyn FnMut(&str, &'a Node) -> Result<(), OperatorError>) -> Result<(), OperatorError> {
        f(&path, self)?;
        if let Node::Min { children } | Node::Max { children } = self {
            for (i, c) in children.iter().enumerate() {
                c.visit(format!("{path}/{i}"), f)?;
            }
        }
        Ok(())
    }

    pub(crate) fn is_linear_leaf(&self) -> bool {
        matches!(self, Node::Linear { .. })
    }
}

fn select(
    children: &[Node],
    dim: usize,
    s: &SecondDiffs,
    y: Point,
    better: impl Fn(f64, f64) -> bool,
) -> (ActiveLeaf, f64) {
    let mut iter = children.iter();
    let first = iter.next().expect("validated nonempty");
    let mut best = first.active(dim, s, y);
    for c in iter {
        let cand = c.active(dim, s, y);
        if better(cand.1, best.1) {
            best = cand;
        }
    }
    best
}

/// Operator document: lattice plus declared constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub name: String,
    pub dim: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Whether `F(0, y) = 0` is required; operands of a min/max may waive it.
    #[serde(default = "default_true")]
    pub zero_source: bool,
    pub root: Node,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_gamma() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl OperatorSpec {
    /// Builds and validates a spec with zero source term.
    pub fn new(name: &str, dim: usize, lambda: f64, big_lambda: f64, root: Node) -> Result<Self, OperatorError> {
        let spec = Self {
            schema: SCHEMA_VERSION,
            name: name.to_string(),
            dim,
            lambda,
            big_lambda,
            kappa: 0.0,
            gamma: 1.0,
            zero_source: true,
            root,
        };
        let spec = spec.with_default_kappa();
        spec.validate()?;
        Ok(spec)
    }

    /// Builds an operand spec that may have `F(0, y) != 0`.
    pub fn operand(name: &str, dim: usize, lambda: f64, big_lambda: f64, root: Node) -> Result<Self, OperatorError> {
        let mut spec = Self::new_unchecked(name, dim, lambda, big_lambda, root);
        spec.zero_source = false;
        let spec = spec.with_default_kappa();
        spec.validate()?;
        Ok(spec)
    }

    fn new_unchecked(name: &str, dim: usize, lambda: f64, big_lambda: f64, root: Node) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            name: name.to_string(),
            dim,
            lambda,
            big_lambda,
            kappa: 0.0,
            gamma: 1.0,
            zero_source: true,
            root,
        }
    }

    /// Sets `kappa` to the structural Lipschitz bound (gamma = 1) when unset.
    fn with_default_kappa(mut self) -> Self {
        if self.kappa == 0.0 {
            let (coeff, offset) = self.root.lipschitz_bounds();
            self.kappa = coeff + offset;
        }
        self
    }

    pub fn with_holder(mut self, kappa: f64, gamma: f64) -> Self {
        self.kappa = kappa;
        self.gamma = gamma;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, OperatorError> {
        let spec: Self = toml::from_str(text).map_err(|e| OperatorError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Checks every documented invariant on the audit grid.
    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.schema != SCHEMA_VERSION {
            return Err(OperatorError::Parse(format!("unsupported schema version {}", self.schema)));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(OperatorError::UnsupportedDim(self.dim));
        }
        if !(self.lambda > 0.0 && self.big_lambda >= self.lambda) {
            return Err(OperatorError::InvalidBounds { lambda: self.lambda, big_lambda: self.big_lambda });
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || self.kappa < 0.0 {
            return Err(OperatorError::Argument(format!("holder data ({}, {})", self.kappa, self.gamma)));
        }
        let audit = audit_points(self.dim);
        let (dim, lambda, big_lambda) = (self.dim, self.lambda, self.big_lambda);
        let slack = 1e-12 * big_lambda;
        let spectral_cap = big_lambda / (dim as f64).sqrt();
        self.root.visit("root".into(), &mut |path, node| match node {
            Node::Min { children } if children.is_empty() => Err(OperatorError::EmptyNode("min")),
            Node::Max { children } if children.is_empty() => Err(OperatorError::EmptyNode("max")),
            Node::Linear { coefficients, .. } => {
                for &y in &audit {
                    let a = coefficients.eval(dim, y);
                    let (lo, hi) = if dim == 1 { (a.m11(), a.m11()) } else { let (e, _) = a.eigen(); (e[0], e[1]) };
                    if lo < lambda - slack || hi > spectral_cap * (1.0 + 1e-12) {
                        return Err(OperatorError::SpectrumOutOfBounds {
                            leaf: path.to_string(),
                            y,
                            lo,
                            hi,
                            lambda,
                            big_lambda,
                        });
                    }
                }
                Ok(())
            }
            Node::PucciMinus { lower, upper, .. } | Node::PucciPlus { lower, upper, .. } => {
                let reason = if !(*lower > 0.0 && upper >= lower) {
                    Some("need 0 < lower <= upper".to_string())
                } else if *lower < lambda - slack || *upper > spectral_cap * (1.0 + 1e-12) {
                    Some(format!("outside declared bounds ({lambda}, {big_lambda} / sqrt(n))"))
                } else if dim == 2 && upper / lower > PUCCI_MAX_RATIO {
                    Some(format!("ratio exceeds {PUCCI_MAX_RATIO:.4}; optimal coefficients are not diagonally dominant"))
                } else {
                    None
                };
                match reason {
                    Some(reason) => Err(OperatorError::InvalidPucci {
                        leaf: path.to_string(),
                        lower: *lower,
                        upper: *upper,
                        reason,
                    }),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        })?;
        if self.zero_source {
            let zero = SymMatrix::zero(self.dim);
            for &y in &audit {
                let v = self.root.value(self.dim, &zero, y);
                if v.abs() > 1e-12 {
                    return Err(OperatorError::NonzeroSource { value: v, y });
                }
            }
        }
        Ok(())
    }

    /// Whether membership in the class with Lipschitz `D_M F` is asserted;
    /// only single linear leaves qualify.
    pub fn is_r1(&self) -> bool {
        self.root.is_linear_leaf()
    }

    pub fn is_y_independent(&self) -> bool {
        self.root.max_frequency() == 0
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Concatenates two specs under a new MIN or MAX node with merged bounds.
    pub fn combine(name: &str, kind: &str, parts: &[&OperatorSpec]) -> Result<Self, OperatorError> {
        let dim = parts.first().ok_or(OperatorError::EmptyNode("combine"))?.dim;
        if parts.iter().any(|p| p.dim != dim) {
            return Err(OperatorError::Argument("dimension mismatch".into()));
        }
        let lambda = parts.iter().map(|p| p.lambda).fold(f64::INFINITY, f64::min);
        let big_lambda = parts.iter().map(|p| p.big_lambda).fold(0.0, f64::max);
        let children = parts.iter().map(|p| p.root.clone()).collect();
        let root = match kind {
            "min" => Node::Min { children },
            "max" => Node::Max { children },
            other => return Err(OperatorError::Argument(format!("unknown combinator {other}"))),
        };
        let kappa = parts.iter().map(|p| p.kappa).fold(0.0, f64::max);
        let gamma = parts.iter().map(|p| p.gamma).fold(1.0, f64::min);
        let mut spec = Self::new_unchecked(name, dim, lambda, big_lambda, root);
        spec.kappa = kappa;
        spec.gamma = gamma;
        spec.zero_source = parts.iter().all(|p| p.zero_source);
        spec.validate()?;
        Ok(spec)
    }
}

/// Points of the audit grid on the unit cell.
pub(crate) fn audit_points(dim: usize) -> Vec<Point> {
    let n = AUDIT_POINTS_PER_AXIS;
    let step = 1.0 / n as f64;
    match dim {
        1 => (0..n).map(|i| [i as f64 * step, 0.0]).collect(),
        _ => (0..n * n).map(|k| [(k % n) as f64 * step, (k / n) as f64 * step]).collect(),
    }
}

impl Operator for OperatorSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> (f64, f64) {
        (self.lambda, self.big_lambda)
    }

    fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        format!("{}-{hex}", self.name)
    }

    fn value(&self, m: &SymMatrix, y: Point) -> f64 {
        self.root.value(self.dim, m, y)
    }

    fn active(&self, s: &SecondDiffs, y: Point) -> ActiveLeaf {
        self.root.active(self.dim, s, y).0
    }

    fn scheme_value(&self, s: &SecondDiffs, y: Point) -> f64 {
        self.root.active(self.dim, s, y).1
    }

    fn max_frequency(&self) -> u32 {
        self.root.max_frequency()
    }

    fn audit_monotone(&self) -> Result<(), OperatorError> {
        if self.dim == 1 {
            return Ok(());
        }
        let audit = audit_points(2);
        self.root.visit("root".into(), &mut |path, node| {
            if let Node::Linear { coefficients, .. } = node {
                for &y in &audit {
                    let a = coefficients.eval(2, y);
                    let diag = a.m11().min(a.m22());
                    if a.m12().abs() > diag * (1.0 + 1e-12) {
                        return Err(OperatorError::NotMonotone { leaf: path.to_string(), y, off: a.m12().abs(), diag });
                    }
                }
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos1d() -> OperatorSpec {
        OperatorSpec::new(
            "cos",
            1,
            1.0,
            3.0,
            Node::linear(CoefficientField::scalar(TrigPoly::constant(2.0).with_cos([1, 0], 1.0))),
        )
        .unwrap()
    }

    #[test]
    fn linear_leaf_value() {
        let s = cos1d();
        assert_eq!(s.value(&SymMatrix::scalar(1.0), [0.0, 0.0]), 3.0);
        assert_eq!(s.value(&SymMatrix::scalar(0.0), [0.3, 0.0]), 0.0);
    }

    #[test]
    fn toml_round_trip() {
        let s = cos1d();
        let text = s.to_toml();
        assert!(text.contains("kind = \"linear\""), "{text}");
        assert_eq!(OperatorSpec::from_toml(&text).unwrap(), s);
    }

    #[test]
    fn rejects_out_of_band_leaf() {
        let bad = OperatorSpec::new(
            "bad",
            1,
            1.5,
            3.0,
            Node::linear(CoefficientField::scalar(TrigPoly::constant(2.0).with_cos([1, 0], 1.0))),
        );
        assert!(matches!(bad, Err(OperatorError::SpectrumOutOfBounds { .. })));
    }

    #[test]
    fn rejects_nonzero_source_unless_operand() {
        let leaf = Node::affine(CoefficientField::scalar(TrigPoly::constant(2.0)), TrigPoly::constant(0.5));
        assert!(matches!(
            OperatorSpec::new("s", 1, 1.0, 3.0, leaf.clone()),
            Err(OperatorError::NonzeroSource { .. })
        ));
        assert!(OperatorSpec::operand("s", 1, 1.0, 3.0, leaf).is_ok());
    }

    #[test]
    fn monotonicity_audit_flags_cross_dominant_leaf() {
        let root = Node::linear(CoefficientField {
            a11: TrigPoly::constant(1.0),
            a22: TrigPoly::constant(3.0),
            a12: TrigPoly::constant(1.2),
        });
        let spec = OperatorSpec::new("x", 2, 0.3, 10.0, root).unwrap();
        assert!(matches!(spec.audit_monotone(), Err(OperatorError::NotMonotone { .. })));
    }
}
