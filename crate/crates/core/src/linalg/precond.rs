//! Fast-diagonalization preconditioner for
//! `Â = C_m W_t ⊗ M̂_s + D M_t ⊗ K̂_s + a c1 M_t ⊗ M̂_s`, plus the
//! diagonally scaled parametric mass preconditioner used by PCG.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::decomp::{build_time_pencil, generalized_eig, SpaceEigen, TimePencil, C64};
use super::krylov::Preconditioner;
use crate::assembly::{kron_apply, SpaceOperator};
use crate::error::{Error, Result};

/// Relative imaginary residue tolerated in the back-transformed vector.
pub const IMAGINARY_TOLERANCE: f64 = 1e-8;

/// One block-arrowhead system (per spatial eigenvalue), after factoring out
/// `U_t ⊗ U_s`: diagonal `h`, last column `b`, last row `c`, corner `h_n`.
#[derive(Debug, Clone)]
pub struct ArrowheadBlock {
    pub diag: Vec<C64>,
    pub border_col: Vec<C64>,
    pub border_row: Vec<C64>,
    pub corner: C64,
}

impl ArrowheadBlock {
    /// Schur complement on the last unknown.
    pub fn solve(&self, y: &mut [C64]) {
        let n = self.diag.len();
        let mut num = y[n];
        let mut den = self.corner;
        for i in 0..n {
            num -= self.border_row[i] * y[i] / self.diag[i];
            den -= self.border_row[i] * self.border_col[i] / self.diag[i];
        }
        let xn = num / den;
        for i in 0..n {
            y[i] = (y[i] - self.border_col[i] * xn) / self.diag[i];
        }
        y[n] = xn;
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            m[(i, n)] = self.border_col[i];
            m[(n, i)] = self.border_row[i];
        }
        m[(n, n)] = self.corner;
        m
    }
}

#[derive(Debug, Clone)]
pub struct FastDiagPreconditioner {
    pub space: Vec<SpaceEigen>,
    pub time: TimePencil,
    pub c_m: f64,
    pub d: f64,
    pub reaction: f64,
    /// `λ_s` per spatial multi-index (colexicographic).
    lambda_space: Vec<f64>,
    u_space_t: Vec<DMatrix<f64>>,
    u_space: Vec<DMatrix<f64>>,
    ut_re: DMatrix<f64>,
    ut_im: DMatrix<f64>,
}

impl FastDiagPreconditioner {
    /// `mass[l]`, `stiffness[l]` are the univariate spatial factors and
    /// `(w_t, m_t)` the constrained time advection and mass.
    pub fn new(
        mass: &[DMatrix<f64>],
        stiffness: &[DMatrix<f64>],
        w_t: &DMatrix<f64>,
        m_t: &DMatrix<f64>,
        c_m: f64,
        d: f64,
        reaction: f64,
    ) -> Result<Self> {
        if mass.len() != stiffness.len() || mass.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: mass.len(),
                actual: stiffness.len(),
            });
        }
        let space: Vec<SpaceEigen> = mass
            .iter()
            .zip(stiffness)
            .map(|(m, k)| generalized_eig(k, m))
            .collect::<Result<_>>()?;
        let time = build_time_pencil(w_t, m_t)?;
        let mut lambda_space = vec![0.0];
        for e in &space {
            lambda_space = e
                .lambda
                .iter()
                .flat_map(|&l| lambda_space.iter().map(move |&acc| acc + l))
                .collect();
        }
        let u_space: Vec<DMatrix<f64>> = space.iter().map(|e| e.u.clone()).collect();
        let u_space_t = u_space.iter().map(|u| u.transpose()).collect();
        let ut_re = time.u.map(|z| z.re);
        let ut_im = time.u.map(|z| z.im);
        Ok(Self {
            space,
            time,
            c_m,
            d,
            reaction,
            lambda_space,
            u_space_t,
            u_space,
            ut_re,
            ut_im,
        })
    }

    pub fn n_space(&self) -> usize {
        self.lambda_space.len()
    }

    pub fn n_time(&self) -> usize {
        self.time.u.nrows()
    }

    pub fn n(&self) -> usize {
        self.n_space() * self.n_time()
    }

    /// Arrowhead block for spatial eigen index `s`.
    pub fn block(&self, s: usize) -> ArrowheadBlock {
        let shift = C64::new(self.d * self.lambda_space[s] + self.reaction, 0.0);
        let cm = C64::new(self.c_m, 0.0);
        ArrowheadBlock {
            diag: self.time.lambda.iter().map(|&l| cm * l + shift).collect(),
            border_col: self.time.g.iter().map(|&g| cm * g).collect(),
            border_row: self.time.h.iter().map(|&h| cm * h).collect(),
            corner: cm * self.time.sigma + shift,
        }
    }

    /// Dense `Â` (small problems only).
    pub fn dense_operator(&self) -> DMatrix<f64> {
        let ms = self.space.iter().map(|e| e.u.transpose().try_inverse().expect("invertible")).collect::<Vec<_>>();
        // M̂_l = U_l^{-T} U_l^{-1}, K̂_l = U_l^{-T} Λ_l U_l^{-1}
        let mass: Vec<DMatrix<f64>> = ms.iter().map(|a| a * a.transpose()).collect();
        let stiff: Vec<DMatrix<f64>> = ms
            .iter()
            .zip(&self.space)
            .map(|(a, e)| a * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&e.lambda)) * a.transpose())
            .collect();
        let kron = |f: &[DMatrix<f64>]| f.iter().skip(1).fold(f[0].clone(), |acc, m| m.kronecker(&acc));
        let ms_full = kron(&mass);
        let mut ks_full = DMatrix::zeros(ms_full.nrows(), ms_full.ncols());
        for l in 0..mass.len() {
            let mut f = mass.clone();
            f[l] = stiff[l].clone();
            ks_full += kron(&f);
        }
        let ui = self.time.u.clone().try_inverse().expect("invertible");
        let mt = (ui.adjoint() * &ui).map(|z| z.re);
        let wt = (ui.adjoint() * &self.time.delta * &ui).map(|z| z.re);
        wt.kronecker(&ms_full) * self.c_m + mt.kronecker(&ks_full) * self.d + mt.kronecker(&ms_full) * self.reaction
    }

    pub fn apply_vec(&self, r: &[f64]) -> Result<Vec<f64>> {
        let ns = self.n_space();
        let nt = self.n_time();
        if r.len() != ns * nt {
            return Err(Error::DimensionMismatch {
                expected: ns * nt,
                actual: r.len(),
            });
        }
        // P = U_sᵀ R, column by column
        let cols: Vec<Vec<f64>> = r.par_chunks(ns).map(|c| kron_apply(&self.u_space_t, c)).collect();
        let p = DMatrix::from_iterator(ns, nt, cols.into_iter().flatten());
        // Y = P conj(U_t)
        let y_re = &p * &self.ut_re;
        let y_im = -(&p * &self.ut_im);
        let mut rows: Vec<Vec<C64>> = (0..ns)
            .map(|s| (0..nt).map(|j| C64::new(y_re[(s, j)], y_im[(s, j)])).collect())
            .collect();
        rows.par_iter_mut().enumerate().for_each(|(s, row)| self.block(s).solve(row));
        let z_re = DMatrix::from_fn(ns, nt, |s, j| rows[s][j].re);
        let z_im = DMatrix::from_fn(ns, nt, |s, j| rows[s][j].im);
        // Z U_tᵀ
        let x_re = &z_re * self.ut_re.transpose() - &z_im * self.ut_im.transpose();
        let x_im = &z_re * self.ut_im.transpose() + &z_im * self.ut_re.transpose();
        let re_norm = x_re.norm();
        let im_norm = x_im.norm();
        if im_norm > IMAGINARY_TOLERANCE * re_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalConsistency(format!(
                "preconditioner imaginary residue {:e} relative",
                im_norm / re_norm.max(f64::MIN_POSITIVE)
            )));
        }
        let out: Vec<Vec<f64>> = x_re
            .as_slice()
            .par_chunks(ns)
            .map(|c| kron_apply(&self.u_space, c))
            .collect();
        Ok(out.into_iter().flatten().collect())
    }
}

impl Preconditioner for FastDiagPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(&self.apply_vec(r)?);
        Ok(())
    }
}

/// `D^{-1/2} M̂^{-1} D^{-1/2}` with `M̂ = ⊗ M̂_l` and `D = diag(M) / diag(M̂)`.
#[derive(Debug, Clone)]
pub struct MassPreconditioner {
    inverses: Vec<DMatrix<f64>>,
    scale: Vec<f64>,
}

impl MassPreconditioner {
    pub fn new(parametric_mass: &[DMatrix<f64>], mass_diagonal: &[f64]) -> Result<Self> {
        let inverses: Vec<DMatrix<f64>> = parametric_mass
            .iter()
            .map(|m| {
                m.clone()
                    .cholesky()
                    .map(|c| c.inverse())
                    .ok_or(Error::NotPositiveDefinite)
            })
            .collect::<Result<_>>()?;
        let mut hat_diag = vec![1.0];
        for m in parametric_mass {
            hat_diag = m
                .diagonal()
                .iter()
                .flat_map(|&v| hat_diag.iter().map(move |&acc| acc * v))
                .collect();
        }
        if hat_diag.len() != mass_diagonal.len() {
            return Err(Error::DimensionMismatch {
                expected: hat_diag.len(),
                actual: mass_diagonal.len(),
            });
        }
        let scale = mass_diagonal
            .iter()
            .zip(&hat_diag)
            .map(|(&m, &h)| {
                let r = m / h;
                if r > 0.0 {
                    Ok(1.0 / r.sqrt())
                } else {
                    Err(Error::NotPositiveDefinite)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { inverses, scale })
    }

    pub fn for_operator(parametric_mass: &[DMatrix<f64>], mass: &SpaceOperator) -> Result<Self> {
        let n = mass.n();
        let diag: Vec<f64> = if mass.terms.len() == 1 {
            match &mass.terms[0].1 {
                crate::assembly::SpaceFactor::Sparse(m) => m.diagonal().iter().map(|v| v * mass.terms[0].0).collect(),
                crate::assembly::SpaceFactor::Kron(_) => kron_diag(mass),
            }
        } else {
            kron_diag(mass)
        };
        debug_assert_eq!(diag.len(), n);
        Self::new(parametric_mass, &diag)
    }
}

fn kron_diag(op: &SpaceOperator) -> Vec<f64> {
    let mut out = vec![0.0; op.n()];
    for (c, f) in &op.terms {
        let d: Vec<f64> = match f {
            crate::assembly::SpaceFactor::Sparse(m) => m.diagonal(),
            crate::assembly::SpaceFactor::Kron(fs) => {
                let mut acc = vec![1.0];
                for m in fs.iter() {
                    acc = m
                        .diagonal()
                        .iter()
                        .flat_map(|&v| acc.iter().map(move |&a| a * v))
                        .collect();
                }
                acc
            }
        };
        out.iter_mut().zip(d).for_each(|(o, v)| *o += c * v);
    }
    out
}

impl Preconditioner for MassPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let scaled: Vec<f64> = r.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        let y = kron_apply(&self.inverses, &scaled);
        z.iter_mut()
            .zip(y.iter().zip(&self.scale))
            .for_each(|(o, (v, s))| *o = v * s);
        Ok(())
    }
}
