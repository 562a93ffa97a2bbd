//! Interpolated Θ factors and the stabilization Kronecker terms.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::lowrank::LowRankTheta;
use super::tau::{compute_tau, TauFunctions};
use crate::assembly::{constrain, weighted_derivative_matrix, KroneckerOperator, SpaceFactor, SpaceQuadrature};
use crate::error::Result;
use crate::geometry::GeometryMap;
use crate::sparse::{tensor_band_pattern, CsrMatrix};
use crate::spline::{SplineSpace1D, TensorSpaceTime};

/// Piecewise-linear interpolation of `values` on the increasing `nodes`,
/// held constant outside.
pub fn interp_linear(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    if x <= nodes[0] {
        return values[0];
    }
    if x >= nodes[n - 1] {
        return values[n - 1];
    }
    let k = nodes.partition_point(|&g| g <= x).clamp(1, n - 1) - 1;
    let s = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
    (1.0 - s) * values[k] + s * values[k + 1]
}

/// Corner indices and weights of the `d`-linear interpolant at `eta`.
pub(crate) fn multilinear_stencil(grids: &[Vec<f64>], eta: &[f64]) -> Vec<(usize, f64)> {
    let mut stencil = vec![(0usize, 1.0f64)];
    let mut stride = 1;
    for (g, &x) in grids.iter().zip(eta) {
        let n = g.len();
        let (k, s) = if x <= g[0] {
            (0, 0.0)
        } else if x >= g[n - 1] {
            (n - 2, 1.0)
        } else {
            let k = g.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
            (k, (x - g[k]) / (g[k + 1] - g[k]))
        };
        let mut next = Vec::with_capacity(stencil.len() * 2);
        for &(idx, w) in &stencil {
            next.push((idx + k * stride, w * (1.0 - s)));
            next.push((idx + (k + 1) * stride, w * s));
        }
        stencil = next;
        stride *= n;
    }
    stencil
}

/// Stabilization matrices for one low-rank Θ: `time[r]` holds
/// `Σ_k S^t_{r,k}`, `space[r]` holds `S^s_r`.
#[derive(Debug, Clone)]
pub struct StabilizationMatrices {
    pub weights: Vec<f64>,
    pub time_by_order: Vec<Vec<DMatrix<f64>>>,
    pub time: Vec<DMatrix<f64>>,
    pub space: Vec<Arc<CsrMatrix>>,
}

impl StabilizationMatrices {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Appends `C_m Σ_r R_rr (Σ_k S^t_{r,k}) ⊗ S^s_r`.
    pub fn push_terms(&self, op: &mut KroneckerOperator, c_m: f64) -> Result<()> {
        for r in 0..self.rank() {
            op.push(c_m * self.weights[r], self.time[r].clone(), SpaceFactor::Sparse(self.space[r].clone()))?;
        }
        Ok(())
    }
}

/// Geometry-dependent data reused across fixed-point iterations.
#[derive(Debug, Clone)]
pub struct Stabilizer {
    tau: TauFunctions,
    time: SplineSpace1D,
    time_greville: Vec<f64>,
    quad: SpaceQuadrature,
    pattern: CsrMatrix,
    offsets: Vec<usize>,
    stencils: Vec<Vec<(usize, f64)>>,
    q: usize,
}

impl Stabilizer {
    pub fn new(st: &TensorSpaceTime, map: &GeometryMap) -> Result<Self> {
        let tau = compute_tau(st.time())?;
        let ps = st.spatial()[0].degree();
        let pt = st.time().degree();
        let space_greville: Vec<Vec<f64>> = st.spatial().iter().map(|s| s.greville()).collect();
        let quad = SpaceQuadrature::new(st.spatial(), map, ps + 2, Some(&space_greville), false)?;
        let pattern = tensor_band_pattern(&st.spatial_dims(), &vec![ps; st.dim()]);
        let offsets = quad.row_offsets(&pattern);
        let mut stencils = Vec::with_capacity(quad.ncells * quad.nq);
        for c in 0..quad.ncells {
            for qp in 0..quad.nq {
                stencils.push(multilinear_stencil(&space_greville, quad.eta(c, qp)));
            }
        }
        Ok(Self {
            tau,
            time: st.time().clone(),
            time_greville: st.time().greville()[1..].to_vec(),
            quad,
            pattern,
            offsets,
            stencils,
            q: pt + 2,
        })
    }

    pub fn tau(&self) -> &TauFunctions {
        &self.tau
    }

    /// `θ_{t,r}` at parametric time `s`.
    pub fn theta_time(&self, lr: &LowRankTheta, r: usize, s: f64) -> f64 {
        interp_linear(&self.time_greville, lr.u.column(r).as_slice(), s)
    }

    pub fn assemble(&self, lr: &LowRankTheta) -> StabilizationMatrices {
        let pt = self.time.degree();
        let mut time_by_order = Vec::with_capacity(lr.rank());
        let mut time = Vec::with_capacity(lr.rank());
        let mut space = Vec::with_capacity(lr.rank());
        for r in 0..lr.rank() {
            let ucol = lr.u.column(r).into_owned();
            let by_k: Vec<DMatrix<f64>> = (1..=pt)
                .map(|k| {
                    let weight = |s: f64| self.tau.eval_parametric(k, s) * interp_linear(&self.time_greville, ucol.as_slice(), s);
                    constrain(&weighted_derivative_matrix(&self.time, k, &weight, self.q, &self.time_greville))
                })
                .collect();
            let sum = by_k.iter().skip(1).fold(by_k[0].clone(), |acc, m| acc + m);
            time_by_order.push(by_k);
            time.push(sum);
            let vcol = lr.v.column(r);
            let omega: Vec<f64> = self
                .stencils
                .iter()
                .map(|st| st.iter().map(|&(i, w)| w * vcol[i]).sum())
                .collect();
            space.push(Arc::new(self.quad.mass_matrix(&self.pattern, &self.offsets, Some(&omega))));
        }
        StabilizationMatrices {
            weights: lr.singular_values.clone(),
            time_by_order,
            time,
            space,
        }
    }
}
