//! Sums of Kronecker products `time ⊗ space` applied without forming them.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::space::{SpaceFactor, SpaceOperator};
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, KronLayout};

/// Mode-`l` product: applies `a` along direction `l` of the colexicographic
/// tensor `x` with extents `dims`.
pub fn apply_mode(a: &DMatrix<f64>, x: &[f64], dims: &[usize], l: usize, out: &mut [f64]) {
    let inner: usize = dims[..l].iter().product();
    let n = dims[l];
    let outer: usize = dims[l + 1..].iter().product();
    let m = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    out[..inner * m * outer].iter_mut().for_each(|v| *v = 0.0);
    for o in 0..outer {
        for c in 0..n {
            let xs = &x[inner * (c + n * o)..inner * (c + 1 + n * o)];
            for r in 0..m {
                let arc = a[(r, c)];
                if arc == 0.0 {
                    continue;
                }
                let ys = &mut out[inner * (r + m * o)..inner * (r + 1 + m * o)];
                for (y, xv) in ys.iter_mut().zip(xs) {
                    *y += arc * xv;
                }
            }
        }
    }
}

/// `(factors[d-1] ⊗ … ⊗ factors[0]) x`.
pub fn kron_apply(factors: &[DMatrix<f64>], x: &[f64]) -> Vec<f64> {
    let mut dims: Vec<usize> = factors.iter().map(|m| m.ncols()).collect();
    let mut cur = x.to_vec();
    for (l, a) in factors.iter().enumerate() {
        let size: usize = dims.iter().product::<usize>() / dims[l] * a.nrows();
        let mut next = vec![0.0; size];
        apply_mode(a, &cur, &dims, l, &mut next);
        dims[l] = a.nrows();
        cur = next;
    }
    cur
}

#[derive(Debug, Clone)]
pub struct KronTerm {
    pub coef: f64,
    pub time: DMatrix<f64>,
    pub space: SpaceFactor,
    time_rows: Vec<Vec<(usize, f64)>>,
}

impl KronTerm {
    pub fn new(coef: f64, time: DMatrix<f64>, space: SpaceFactor) -> Self {
        let time_rows = (0..time.nrows())
            .map(|i| {
                (0..time.ncols())
                    .filter_map(|j| (time[(i, j)] != 0.0).then(|| (j, time[(i, j)])))
                    .collect()
            })
            .collect();
        Self {
            coef,
            time,
            space,
            time_rows,
        }
    }
}

/// `Σ c (T ⊗ S) + correction`, acting on vectors ordered space-fastest.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    n_time: usize,
    n_space: usize,
    terms: Vec<KronTerm>,
    correction: Option<CsrMatrix>,
}

impl KroneckerOperator {
    pub fn new(n_time: usize, n_space: usize) -> Self {
        Self {
            n_time,
            n_space,
            terms: Vec::new(),
            correction: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n_time * self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn correction(&self) -> Option<&CsrMatrix> {
        self.correction.as_ref()
    }

    pub fn push(&mut self, coef: f64, time: DMatrix<f64>, space: SpaceFactor) -> Result<()> {
        if time.nrows() != self.n_time || time.ncols() != self.n_time {
            return Err(Error::DimensionMismatch {
                expected: self.n_time,
                actual: time.nrows(),
            });
        }
        if space.n() != self.n_space {
            return Err(Error::DimensionMismatch {
                expected: self.n_space,
                actual: space.n(),
            });
        }
        self.terms.push(KronTerm::new(coef, time, space));
        Ok(())
    }

    /// Appends `coef · time ⊗ op` term by term.
    pub fn push_operator(&mut self, coef: f64, time: &DMatrix<f64>, op: &SpaceOperator) -> Result<()> {
        for (c, f) in &op.terms {
            self.push(coef * c, time.clone(), f.clone())?;
        }
        Ok(())
    }

    pub fn set_correction(&mut self, m: CsrMatrix) -> Result<()> {
        if m.nrows() != self.n() || m.ncols() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: m.nrows(),
            });
        }
        self.correction = Some(m);
        Ok(())
    }

    /// Matrix-vector product via `(T ⊗ S) vec(X) = vec(S X Tᵀ)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: x.len(),
            });
        }
        let ns = self.n_space;
        let mut y = vec![0.0; x.len()];
        for term in &self.terms {
            // space factor on every time column
            let mut z = vec![0.0; x.len()];
            z.par_chunks_mut(ns)
                .zip(x.par_chunks(ns))
                .for_each(|(zc, xc)| term.space.apply(xc, zc));
            y.par_chunks_mut(ns).enumerate().for_each(|(i, yc)| {
                for &(j, t) in &term.time_rows[i] {
                    let f = term.coef * t;
                    for (a, b) in yc.iter_mut().zip(&z[j * ns..(j + 1) * ns]) {
                        *a += f * b;
                    }
                }
            });
        }
        if let Some(c) = &self.correction {
            let extra = c.mul_vec(x);
            y.iter_mut().zip(extra).for_each(|(a, b)| *a += b);
        }
        Ok(y)
    }

    /// Explicit sparse form on `layout`.
    pub fn to_csr(&self, layout: &KronLayout) -> Result<CsrMatrix> {
        let mut out = layout.empty();
        for term in &self.terms {
            let s = term.space.to_csr(layout.space_pattern());
            layout.add_kron(&mut out, term.coef, &term.time, &s)?;
        }
        if let Some(c) = &self.correction {
            out.add_scaled(1.0, c)?;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for term in &self.terms {
            a += term.time.kronecker(&term.space.to_dense()) * term.coef;
        }
        if let Some(c) = &self.correction {
            a += c.to_dense();
        }
        a
    }
}
