//! Recovery-variable system `(E ⊗ M_s) w = g` with `E = W_t + b d_e M_t`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::krylov::pcg;
use super::precond::MassPreconditioner;
use crate::assembly::{kron_apply, SpaceFactor, SpaceOperator};
use crate::error::{Error, Result};

/// How the spatial mass systems are solved.
#[derive(Debug, Clone)]
pub enum MassSolver {
    /// `M_s = c ⊗ M_l`: exact inverse from the univariate factors.
    Kron { coef: f64, inverses: Vec<DMatrix<f64>> },
    Pcg {
        precond: MassPreconditioner,
        tol: f64,
        max_iter: usize,
    },
}

impl MassSolver {
    pub fn new(mass: &SpaceOperator, parametric_mass: &[DMatrix<f64>], tol: f64) -> Result<Self> {
        if let [(c, SpaceFactor::Kron(f))] = mass.terms.as_slice() {
            let inverses = f
                .iter()
                .map(|m| m.clone().cholesky().map(|ch| ch.inverse()).ok_or(Error::NotPositiveDefinite))
                .collect::<Result<_>>()?;
            return Ok(Self::Kron { coef: *c, inverses });
        }
        Ok(Self::Pcg {
            precond: MassPreconditioner::for_operator(parametric_mass, mass)?,
            tol,
            max_iter: 500,
        })
    }

    /// Returns the solution and the iteration count (0 for the exact path).
    pub fn solve(&self, mass: &SpaceOperator, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        match self {
            Self::Kron { coef, inverses } => Ok((kron_apply(inverses, b).into_iter().map(|v| v / coef).collect(), 0)),
            Self::Pcg { precond, tol, max_iter } => {
                let out = pcg(mass, b, precond, *tol, *max_iter)?;
                Ok((out.x, out.iterations))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct WSolution {
    pub w: Vec<f64>,
    pub pcg_iterations: Vec<usize>,
}

/// `w = vec(M_s^{-1} G E^{-ᵀ})`, `G` the `N_s × N_t` reshaping of `g`.
pub fn solve_w_system(
    w_t: &DMatrix<f64>,
    m_t: &DMatrix<f64>,
    mass: &SpaceOperator,
    mass_solver: &MassSolver,
    b: f64,
    d_e: f64,
    g: &[f64],
) -> Result<WSolution> {
    let nt = w_t.nrows();
    let ns = mass.n();
    if g.len() != nt * ns {
        return Err(Error::DimensionMismatch {
            expected: nt * ns,
            actual: g.len(),
        });
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok(WSolution {
            w: vec![0.0; g.len()],
            pcg_iterations: vec![0; nt],
        });
    }
    let e = w_t + m_t * (b * d_e);
    let lu = e.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularMatrix("time matrix W_t + b d_e M_t".into()));
    }
    // rows of G against E^{-T} on the right: Y = G E^{-T}, i.e. Yᵀ = E^{-1} Gᵀ
    let gmat = DMatrix::from_column_slice(ns, nt, g);
    let y = lu
        .solve(&gmat.transpose())
        .ok_or_else(|| Error::SingularMatrix("time matrix W_t + b d_e M_t".into()))?
        .transpose();
    let cols: Vec<(Vec<f64>, usize)> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = y.column(j).iter().copied().collect();
            mass_solver.solve(mass, &col)
        })
        .collect::<Result<_>>()?;
    let mut w = Vec::with_capacity(g.len());
    let mut its = Vec::with_capacity(nt);
    for (c, it) in cols {
        w.extend(c);
        its.push(it);
    }
    Ok(WSolution { w, pcg_iterations: its })
}

/// Dense reference `(E ⊗ M_s)^{-1} g` for small systems.
pub fn solve_w_dense(w_t: &DMatrix<f64>, m_t: &DMatrix<f64>, m_s: &DMatrix<f64>, b: f64, d_e: f64, g: &[f64]) -> Option<Vec<f64>> {
    let e = w_t + m_t * (b * d_e);
    let a = e.kronecker(m_s);
    a.lu().solve(&DVector::from_column_slice(g)).map(|x| x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::{time_matrices, univariate_matrices};
    use crate::spline::SplineSpace1D;

    #[test]
    fn matches_dense_kronecker_solve() {
        let sx = SplineSpace1D::uniform(2, 3).unwrap();
        let sy = SplineSpace1D::uniform(1, 2).unwrap();
        let st = SplineSpace1D::uniform(2, 4).unwrap();
        let mx = univariate_matrices(&sx, None).mass;
        let my = univariate_matrices(&sy, None).mass;
        let tm = time_matrices(&st, 5.0);
        let ms = SpaceOperator::single(0.7, SpaceFactor::Kron(Arc::new(vec![mx.clone(), my.clone()])));
        let dense_ms = ms.to_dense();
        let n = dense_ms.nrows() * tm.mass.nrows();
        let g: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1).collect();
        let oracle = solve_w_dense(&tm.advection, &tm.mass, &dense_ms, 0.013, 1.0, &g).unwrap();
        let exact = MassSolver::new(&ms, &[mx.clone(), my.clone()], 1e-12).unwrap();
        let sparse_ms = SpaceOperator::single(1.0, SpaceFactor::Sparse(Arc::new(crate::sparse::CsrMatrix::from_dense(&dense_ms))));
        let iterative = MassSolver::new(&sparse_ms, &[mx, my], 1e-13).unwrap();
        for (op, solver) in [(&ms, &exact), (&sparse_ms, &iterative)] {
            let w = solve_w_system(&tm.advection, &tm.mass, op, solver, 0.013, 1.0, &g).unwrap();
            let err = w.w.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(err < 1e-10 * scale, "err {err}");
        }
    }
}
