//! Sparse LU on top of faer, with the symbolic analysis cached per pattern.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Reusable sparse direct solver. The CSR arrays of `A` are handed to faer
/// as the CSC arrays of `Aᵀ`; solves then use the transposed factorization.
#[derive(Default)]
pub struct DirectSolver {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic_pattern: Option<SymbolicSparseColMat<usize>>,
    symbolic: Option<SymbolicLu<usize>>,
    lu: Option<Lu<usize, f64>>,
    n: usize,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("n", &self.n)
            .field("factored", &self.lu.is_some())
            .finish()
    }
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &CsrMatrix) -> Result<()> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        let same = self
            .pattern
            .as_ref()
            .is_some_and(|(rp, ci)| rp.as_slice() == a.row_ptr() && ci.as_slice() == a.col_idx());
        if !same {
            let sym = SymbolicSparseColMat::new_checked(a.nrows(), a.ncols(), a.row_ptr().to_vec(), None, a.col_idx().to_vec());
            let lu_sym = SymbolicLu::try_new(sym.as_ref()).map_err(|e| Error::SingularMatrix(format!("{e:?}")))?;
            self.pattern = Some((a.row_ptr().to_vec(), a.col_idx().to_vec()));
            self.symbolic_pattern = Some(sym);
            self.symbolic = Some(lu_sym);
        }
        let sym = self.symbolic_pattern.as_ref().expect("pattern set");
        let mat = SparseColMatRef::new(sym.as_ref(), a.values());
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone().expect("symbolic set"), mat)
            .map_err(|e| Error::SingularMatrix(format!("{e:?}")))?;
        self.lu = Some(lu);
        self.n = a.nrows();
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let lu = self
            .lu
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("direct solver used before factorization".into()))?;
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: b.len(),
            });
        }
        let mut x = b.to_vec();
        let rhs = MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
        lu.solve_transpose_in_place(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("non-finite solution from sparse LU".into()));
        }
        Ok(x)
    }
}

/// One-shot `A x = b`.
pub fn sparse_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut s = DirectSolver::new();
    s.factor(a)?;
    s.solve(b)
}
