//! Sparse linear systems on a fixed stencil pattern.
//!
//! The sparsity pattern (9-point stencil, optional bordering column and pin
//! row) is built once per grid; each policy only refills the values and
//! reuses the symbolic LU factorization.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

use super::SolveError;

/// Stencil offsets in the order used by [`StencilPattern::slots`]:
/// center, `+-e1`, `+-e2`, `+-(e1+e2)`, `+-(e1-e2)`.
pub(crate) const OFFSETS: [[i64; 2]; 9] = [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]];

pub(crate) const NO_SLOT: usize = usize::MAX;

pub(crate) struct StencilPattern {
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    lu_symbolic: SymbolicLu<usize>,
    /// Per row: slots of the 9 stencil entries, then the bordering column.
    slots: Vec<[usize; 10]>,
}

impl StencilPattern {
    /// `neighbors[k][j]` is the node at `OFFSETS[j]` from `k` (or `NO_SLOT`);
    /// with `bordered`, one extra unknown couples to every stencil row and a
    /// pin row `u[pin] = 0` is appended.
    pub fn new(neighbors: &[[usize; 9]], stencil_rows: &[bool], bordered: Option<usize>) -> Result<Self, SolveError> {
        let nodes = neighbors.len();
        let n = nodes + usize::from(bordered.is_some());
        let mut entries: Vec<(usize, usize)> = Vec::with_capacity(nodes * 10 + 1);
        for (k, nb) in neighbors.iter().enumerate() {
            if stencil_rows[k] {
                for &j in nb.iter().filter(|&&j| j != NO_SLOT) {
                    entries.push((k, j));
                }
                if bordered.is_some() {
                    entries.push((k, nodes));
                }
            } else {
                entries.push((k, k));
            }
        }
        if let Some(pin) = bordered {
            entries.push((nodes, pin));
        }
        entries.sort_unstable_by_key(|&(r, c)| (c, r));
        entries.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        for &(_, c) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = entries.iter().map(|&(r, _)| r).collect();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr.clone(), None, row_idx.clone());
        let find = |r: usize, c: usize| -> usize {
            let range = col_ptr[c]..col_ptr[c + 1];
            let pos = row_idx[range.clone()].binary_search(&r).expect("entry in pattern");
            range.start + pos
        };
        let mut slots = vec![[NO_SLOT; 10]; n];
        for (k, nb) in neighbors.iter().enumerate() {
            if stencil_rows[k] {
                for (j, &col) in nb.iter().enumerate() {
                    if col != NO_SLOT {
                        slots[k][j] = find(k, col);
                    }
                }
                if bordered.is_some() {
                    slots[k][9] = find(k, nodes);
                }
            } else {
                slots[k][0] = find(k, k);
            }
        }
        if let Some(pin) = bordered {
            slots[nodes][0] = find(nodes, pin);
        }
        let lu_symbolic =
            SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| SolveError::Linear(format!("symbolic LU: {e:?}")))?;
        Ok(Self { n, symbolic, lu_symbolic, slots })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.compute_nnz()
    }

    pub fn slots(&self, row: usize) -> &[usize; 10] {
        &self.slots[row]
    }

    /// Solves `A x = b` for values laid out on this pattern.
    pub fn solve(&self, values: &[f64], rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.factor(values)?.solve(rhs)
    }

    pub fn factor(&self, values: &[f64]) -> Result<Factored, SolveError> {
        let mat = SparseColMatRef::<usize, f64>::new(self.symbolic.as_ref(), values);
        let lu = Lu::try_new_with_symbolic(self.lu_symbolic.clone(), mat)
            .map_err(|e| SolveError::Linear(format!("numeric LU: {e:?}")))?;
        Ok(Factored { n: self.n, lu })
    }
}

pub(crate) struct Factored {
    n: usize,
    lu: Lu<usize, f64>,
}

impl Factored {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        let b = faer::Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::Linear("singular system".into()));
        }
        Ok(out)
    }
}
