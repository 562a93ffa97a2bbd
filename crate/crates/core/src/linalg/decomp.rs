//! Generalized eigendecompositions of the univariate pencils.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// `M`-orthonormal eigenvectors of the pencil `(K, M)`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpaceEigen {
    pub u: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

pub fn generalized_eig(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<SpaceEigen> {
    let n = m.nrows();
    if k.shape() != (n, n) || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite)?;
    let c = &linv * k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let u = linv.transpose() * q;
    let lambda = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok(SpaceEigen { u, lambda })
}

/// Bordered eigendecomposition of the time pencil `(W_t, M_t)`:
/// `U_t = [[Ů, t], [0, ρ]]` with `Ů` the `M̊`-orthonormal eigenvectors
/// of the interior pencil and `[t; ρ]` the `M_t`-normalized `[v; 1]`,
/// `M̊ v = -m`. Then `U_t^* M_t U_t = I` and `Δ_t = U_t^* W_t U_t` is an
/// arrowhead matrix with diagonal `(λ_1, …, λ_{N-1}, σ)`, last column `g`
/// and last row `h`.
#[derive(Debug, Clone)]
pub struct TimePencil {
    pub u: DMatrix<C64>,
    pub lambda: Vec<C64>,
    pub v: DVector<f64>,
    pub t: DVector<f64>,
    pub rho: f64,
    pub g: Vec<C64>,
    pub h: Vec<C64>,
    pub sigma: C64,
    pub delta: DMatrix<C64>,
}

/// Relative size of the off-arrow part of `Δ_t` above which the pencil is
/// rejected.
const ARROW_TOLERANCE: f64 = 1e-10;

pub fn build_time_pencil(w: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<TimePencil> {
    let n = w.nrows();
    if n < 2 || w.shape() != m.shape() || m.ncols() != n {
        return Err(Error::InvalidParameter(format!("time pencil needs N_t >= 2 square matrices, got {n}")));
    }
    let ni = n - 1;
    let wi = w.view((0, 0), (ni, ni)).into_owned();
    let mi = m.view((0, 0), (ni, ni)).into_owned();
    let mcol = m.view((0, ni), (ni, 1)).column(0).into_owned();

    let skew = (&wi + wi.transpose()).amax();
    if skew > 1e-10 * wi.amax().max(1.0) {
        return Err(Error::DefectivePencil(format!(
            "interior advection block is not skew-symmetric (defect {skew:e})"
        )));
    }
    let chol = mi.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let linv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(ni, ni))
        .ok_or(Error::NotPositiveDefinite)?;
    // C = L⁻¹ W̊ L⁻ᵀ is skew, so i C is Hermitian
    let c = &linv * &wi * linv.transpose();
    let c = (&c - c.transpose()) * 0.5;
    let ic: DMatrix<C64> = c.map(|x| C64::new(0.0, x));
    let eig = ic.symmetric_eigen();
    let mut order: Vec<usize> = (0..ni).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let linv_t: DMatrix<C64> = linv.transpose().map(|x| C64::new(x, 0.0));
    let vecs = DMatrix::from_fn(ni, ni, |i, j| eig.eigenvectors[(i, order[j])]);
    let uin = linv_t * vecs;
    // C y = λ y with λ = -i d for eigenpairs (d, y) of i C
    let lambda: Vec<C64> = order.iter().map(|&i| C64::new(0.0, -eig.eigenvalues[i])).collect();

    let v = -chol.solve(&mcol);
    let mut vt = DVector::zeros(n);
    vt.rows_mut(0, ni).copy_from(&v);
    vt[ni] = 1.0;
    let norm = (vt.transpose() * m * &vt)[(0, 0)];
    if !(norm > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let vt = vt / norm.sqrt();
    let t = vt.rows(0, ni).into_owned();
    let rho = vt[ni];

    let mut u = DMatrix::<C64>::zeros(n, n);
    u.view_mut((0, 0), (ni, ni)).copy_from(&uin);
    for i in 0..n {
        u[(i, ni)] = C64::new(vt[i], 0.0);
    }
    let wc = w.map(|x| C64::new(x, 0.0));
    let delta = u.adjoint() * &wc * &u;
    let g: Vec<C64> = (0..ni).map(|i| delta[(i, ni)]).collect();
    let h: Vec<C64> = (0..ni).map(|j| delta[(ni, j)]).collect();
    let sigma = delta[(ni, ni)];

    let scale = delta.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut off = 0.0f64;
    for i in 0..ni {
        for j in 0..ni {
            let target = if i == j { lambda[i] } else { C64::new(0.0, 0.0) };
            off = off.max((delta[(i, j)] - target).norm());
        }
    }
    if off > ARROW_TOLERANCE * scale {
        return Err(Error::DefectivePencil(format!("off-arrow entries of size {off:e}")));
    }
    Ok(TimePencil {
        u,
        lambda,
        v,
        t,
        rho,
        g,
        h,
        sigma,
        delta,
    })
}
