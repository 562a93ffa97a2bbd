//! Truncated SVD of Θ̂.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `Θ̂ ≈ U diag(s) Vᵀ` with the smallest rank meeting the relative
/// Frobenius tolerance.
#[derive(Debug, Clone)]
pub struct LowRankTheta {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
    pub tolerance: f64,
    /// Achieved `‖Θ̂ - U R Vᵀ‖_F / ‖Θ̂‖_F` (0 when Θ̂ = 0).
    pub relative_error: f64,
}

impl LowRankTheta {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (r, s) in self.singular_values.iter().enumerate() {
            us.column_mut(r).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn lowrank_factorize(theta: &DMatrix<f64>, tolerance: f64) -> Result<LowRankTheta> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::InvalidParameter(format!("low-rank tolerance {tolerance} outside (0, 1)")));
    }
    let (m, n) = theta.shape();
    let norm = theta.norm();
    if norm == 0.0 {
        return Ok(LowRankTheta {
            u: DMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(n, 0),
            tolerance,
            relative_error: 0.0,
        });
    }
    // faer's SVD (nalgebra's mis-ranks some exactly rank-deficient inputs)
    let a = faer::Mat::from_fn(m, n, |i, j| theta[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::NumericalConsistency(format!("SVD of Θ failed: {e:?}")))?;
    let (uf, vf) = (svd.U(), svd.V());
    let sd = svd.S().column_vector();
    let sv: Vec<f64> = (0..m.min(n)).map(|i| sd[i]).collect();
    // tail[r] = Frobenius norm of the discarded part when keeping r terms
    let mut tail = vec![0.0; sv.len() + 1];
    for r in (0..sv.len()).rev() {
        tail[r] = tail[r + 1] + sv[r] * sv[r];
    }
    let rank = (1..=sv.len()).find(|&r| tail[r].sqrt() <= tolerance * norm).unwrap_or(sv.len());
    let mut u = DMatrix::zeros(m, rank);
    let mut v = DMatrix::zeros(n, rank);
    for r in 0..rank {
        let mut uc = nalgebra::DVector::from_fn(m, |i, _| uf[(i, r)]);
        let mut vc = nalgebra::DVector::from_fn(n, |j, _| vf[(j, r)]);
        // sign convention: largest-magnitude entry of each left vector positive
        let imax = uc.iamax();
        if uc[imax] < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        u.set_column(r, &uc);
        v.set_column(r, &vc);
    }
    let mut lr = LowRankTheta {
        u,
        singular_values: sv[..rank].to_vec(),
        v,
        tolerance,
        relative_error: 0.0,
    };
    lr.relative_error = (theta - lr.reconstruct()).norm() / norm;
    if lr.relative_error > tolerance * (1.0 + 1e-10) + 1e-14 {
        return Err(Error::NumericalConsistency(format!(
            "low-rank error {} exceeds tolerance {tolerance}",
            lr.relative_error
        )));
    }
    Ok(lr)
}
