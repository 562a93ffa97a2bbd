//! Preconditioned GMRES (no restart) and conjugate gradients.

use crate::assembly::{KroneckerOperator, SpaceOperator};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;
}

impl LinearOperator for KroneckerOperator {
    fn size(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(&KroneckerOperator::apply(self, x)?);
        Ok(())
    }
}

impl LinearOperator for CsrMatrix {
    fn size(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.matvec(x, y);
        Ok(())
    }
}

impl LinearOperator for SpaceOperator {
    fn size(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(&SpaceOperator::apply(self, x));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutput {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative (preconditioned, for GMRES) residual per iteration,
    /// starting with the initial one.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Left-preconditioned GMRES; stops when `‖P(b - A x)‖ ≤ tol ‖P b‖`.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
    x0: Option<&[f64]>,
) -> Result<KrylovOutput> {
    let n = op.size();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let mut pb = vec![0.0; n];
    precond.apply(b, &mut pb)?;
    let bnorm = norm(&pb);
    if bnorm == 0.0 {
        return Ok(KrylovOutput {
            x: vec![0.0; n],
            iterations: 0,
            history: vec![0.0],
        });
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut tmp = vec![0.0; n];
    op.apply(&x, &mut tmp)?;
    let r: Vec<f64> = b.iter().zip(&tmp).map(|(a, c)| a - c).collect();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z)?;
    let beta = norm(&z);
    let mut history = vec![beta / bnorm];
    if beta <= tol * bnorm {
        return Ok(KrylovOutput {
            x,
            iterations: 0,
            history,
        });
    }
    let mut basis: Vec<Vec<f64>> = vec![z.iter().map(|v| v / beta).collect()];
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut gvec = vec![beta];
    let mut converged = false;
    for k in 0..max_iter {
        op.apply(&basis[k], &mut tmp)?;
        let mut w = vec![0.0; n];
        precond.apply(&tmp, &mut w)?;
        // classical Gram-Schmidt with one re-orthogonalization pass
        let mut h = vec![0.0; k + 2];
        for _ in 0..2 {
            let coeffs: Vec<f64> = basis.iter().map(|v| dot(v, &w)).collect();
            for (j, (c, v)) in coeffs.iter().zip(&basis).enumerate() {
                h[j] += c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        }
        let hn = norm(&w);
        h[k + 1] = hn;
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
        cs.push(c);
        sn.push(s);
        h[k] = denom;
        h[k + 1] = 0.0;
        gvec.push(-s * gvec[k]);
        gvec[k] *= c;
        hcols.push(h);
        let res = gvec[k + 1].abs();
        history.push(res / bnorm);
        if res <= tol * bnorm || hn == 0.0 {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / hn).collect());
    }
    let m = hcols.len();
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = gvec[i];
        for j in i + 1..m {
            s -= hcols[j][i] * y[j];
        }
        y[i] = s / hcols[i][i];
    }
    for (j, yj) in y.iter().enumerate() {
        x.iter_mut().zip(&basis[j]).for_each(|(a, b)| *a += yj * b);
    }
    let last = *history.last().expect("history nonempty");
    if !converged && last > tol {
        return Err(Error::LinearNonConvergence {
            solver: "GMRES",
            iterations: m,
            last,
            history,
        });
    }
    Ok(KrylovOutput {
        x,
        iterations: m,
        history,
    })
}

/// Preconditioned conjugate gradients; stops when `‖b - A x‖ ≤ tol ‖b‖`.
pub fn pcg(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutput> {
    let n = op.size();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovOutput {
            x,
            iterations: 0,
            history: vec![0.0],
        });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = vec![1.0];
    for it in 0..max_iter {
        op.apply(&p, &mut ap)?;
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(Error::NegativeCurvature { iteration: it });
        }
        let alpha = rz / curv;
        x.iter_mut().zip(&p).for_each(|(a, b)| *a += alpha * b);
        r.iter_mut().zip(&ap).for_each(|(a, b)| *a -= alpha * b);
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(KrylovOutput {
                x,
                iterations: it + 1,
                history,
            });
        }
        precond.apply(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(a, b)| *a = b + beta * *a);
    }
    Err(Error::LinearNonConvergence {
        solver: "PCG",
        iterations: max_iter,
        last: *history.last().expect("history nonempty"),
        history,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    #[test]
    fn identity_one_iteration() {
        let id = CsrMatrix::from_dense(&DMatrix::identity(5, 5));
        let b = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let g = gmres(&id, &b, &IdentityPreconditioner, 1e-8, 10, None).unwrap();
        assert_eq!(g.iterations, 1);
        assert_eq!(g.x, b);
        let c = pcg(&id, &b, &IdentityPreconditioner, 1e-8, 10).unwrap();
        assert_eq!(c.iterations, 1);
    }

    #[test]
    fn three_eigenvalues_three_iterations() {
        let d: Vec<f64> = (0..9).map(|i| [1.0, 2.0, 5.0][i % 3]).collect();
        let a = CsrMatrix::from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)));
        let b: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
        let g = gmres(&a, &b, &IdentityPreconditioner, 1e-10, 20, None).unwrap();
        assert!(g.iterations <= 3);
        let c = pcg(&a, &b, &IdentityPreconditioner, 1e-10, 20).unwrap();
        assert!(c.iterations <= 3);
    }

    #[test]
    fn zero_rhs() {
        let a = CsrMatrix::from_dense(&DMatrix::identity(3, 3));
        let c = pcg(&a, &[0.0; 3], &IdentityPreconditioner, 1e-8, 5).unwrap();
        assert_eq!(c.iterations, 0);
        assert_eq!(c.x, vec![0.0; 3]);
    }

    #[test]
    fn indefinite_detected() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(matches!(
            pcg(&a, &[0.0, 1.0], &IdentityPreconditioner, 1e-8, 5),
            Err(Error::NegativeCurvature { .. })
        ));
    }

    #[test]
    fn nonsymmetric_system() {
        let m = DMatrix::from_fn(20, 20, |i, j| if i == j { 4.0 } else { ((i * 3 + j) as f64).sin() * 0.3 });
        let a = CsrMatrix::from_dense(&m);
        let b: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let g = gmres(&a, &b, &IdentityPreconditioner, 1e-12, 40, None).unwrap();
        let r = &m * nalgebra::DVector::from_vec(g.x) - nalgebra::DVector::from_vec(b);
        assert!(r.norm() < 1e-10);
    }
}
