//! Spatial quadrature with pushed-forward basis data, and the spatial mass
//! and stiffness operators.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::cells::Cells1D;
use super::kron::kron_apply;
use super::univariate::univariate_matrices;
use crate::error::{Error, Result};
use crate::geometry::{EvalLevel, GeometryMap};
use crate::sparse::{tensor_band_pattern, CsrMatrix};
use crate::spline::SplineSpace1D;

/// Tensor Gauss points on every spatial cell with physical weights, basis
/// values, physical gradients and (optionally) physical Laplacians.
///
/// Cells are the solution elements split at the geometry breakpoints and at
/// any extra per-direction breaks.
#[derive(Debug, Clone)]
pub struct SpaceQuadrature {
    pub dim: usize,
    pub dims: Vec<usize>,
    /// Local functions per cell, `(p + 1)^d`.
    pub nloc: usize,
    /// Points per cell, `q^d`.
    pub nq: usize,
    pub ncells: usize,
    cell_elements: Vec<usize>,
    basis_ids: Vec<usize>,
    weights: Vec<f64>,
    eta: Vec<f64>,
    x: Vec<f64>,
    values: Vec<f64>,
    grads: Vec<f64>,
    laplacians: Vec<f64>,
}

struct CellData {
    elements: Vec<usize>,
    ids: Vec<usize>,
    weights: Vec<f64>,
    eta: Vec<f64>,
    x: Vec<f64>,
    values: Vec<f64>,
    grads: Vec<f64>,
    laplacians: Vec<f64>,
}

impl SpaceQuadrature {
    pub fn new(
        spaces: &[SplineSpace1D],
        map: &GeometryMap,
        q: usize,
        extra_breaks: Option<&[Vec<f64>]>,
        with_laplacian: bool,
    ) -> Result<Self> {
        let d = spaces.len();
        if map.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: map.dim(),
            });
        }
        let nders = if with_laplacian { 2 } else { 1 };
        let rules: Vec<Cells1D> = (0..d)
            .map(|l| {
                let mut breaks = map.spaces()[l].breakpoints().to_vec();
                if let Some(extra) = extra_breaks {
                    breaks.extend_from_slice(&extra[l]);
                }
                Cells1D::new(&spaces[l], q, nders, &breaks)
            })
            .collect();
        let dims: Vec<usize> = spaces.iter().map(|s| s.dimension()).collect();
        let ncells: usize = rules.iter().map(|r| r.len()).product();
        let nloc: usize = rules.iter().map(|r| r.nloc).product();
        let nq = q.pow(d as u32);
        let level = if with_laplacian {
            EvalLevel::Hessian
        } else {
            EvalLevel::Jacobian
        };

        let build = |c: usize| -> Result<CellData> {
            let mut cidx = [0usize; 3];
            let mut rem = c;
            for l in 0..d {
                cidx[l] = rem % rules[l].len();
                rem /= rules[l].len();
            }
            let cells: Vec<_> = (0..d).map(|l| &rules[l].cells[cidx[l]]).collect();
            let elements = cells.iter().map(|c| c.element).collect();
            let locals: Vec<usize> = rules.iter().map(|r| r.nloc).collect();
            let mut ids = Vec::with_capacity(nloc);
            for a in 0..nloc {
                let mut rem = a;
                let mut id = 0;
                let mut stride = 1;
                for l in 0..d {
                    id += (cells[l].first + rem % locals[l]) * stride;
                    rem /= locals[l];
                    stride *= dims[l];
                }
                ids.push(id);
            }
            let mut out = CellData {
                elements,
                ids,
                weights: Vec::with_capacity(nq),
                eta: Vec::with_capacity(nq * d),
                x: Vec::with_capacity(nq * d),
                values: Vec::with_capacity(nq * nloc),
                grads: Vec::with_capacity(nq * nloc * d),
                laplacians: Vec::new(),
            };
            for qp in 0..nq {
                let mut qidx = [0usize; 3];
                let mut rem = qp;
                for l in 0..d {
                    qidx[l] = rem % q;
                    rem /= q;
                }
                let eta: Vec<f64> = (0..d).map(|l| cells[l].points[qidx[l]]).collect();
                let wpar: f64 = (0..d).map(|l| cells[l].weights[qidx[l]]).product();
                let geo = map.eval(&eta, level)?;
                let jac = geo.jacobian.as_ref().expect("jacobian requested");
                let det = jac.determinant();
                let ginv = jac
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::SingularGeometry {
                        det,
                        point: eta.clone(),
                    })?;
                // metric G G^T and its contraction with the map Hessians
                let metric = &ginv * ginv.transpose();
                let kappa: Vec<f64> = geo
                    .hessians
                    .as_ref()
                    .map(|hs| hs.iter().map(|h| metric.component_mul(h).sum()).collect())
                    .unwrap_or_default();
                out.weights.push(wpar * det.abs());
                out.eta.extend_from_slice(&eta);
                out.x.extend_from_slice(&geo.point);
                let der = |l: usize, k: usize, j: usize| rules[l].der(cidx[l], qidx[l], k, j);
                for a in 0..nloc {
                    let mut loc = [0usize; 3];
                    let mut rem = a;
                    for l in 0..d {
                        loc[l] = rem % locals[l];
                        rem /= locals[l];
                    }
                    let shape = |orders: &[usize; 3]| -> f64 { (0..d).map(|l| der(l, orders[l], loc[l])).product() };
                    out.values.push(shape(&[0, 0, 0]));
                    let mut g_eta = [0.0; 3];
                    for (n, g) in g_eta.iter_mut().enumerate().take(d) {
                        let mut o = [0usize; 3];
                        o[n] = 1;
                        *g = shape(&o);
                    }
                    let mut g_x = [0.0; 3];
                    for m in 0..d {
                        g_x[m] = (0..d).map(|n| ginv[(n, m)] * g_eta[n]).sum();
                    }
                    out.grads.extend_from_slice(&g_x[..d]);
                    if with_laplacian {
                        let mut lap = 0.0;
                        for n1 in 0..d {
                            for n2 in 0..d {
                                let mut o = [0usize; 3];
                                o[n1] += 1;
                                o[n2] += 1;
                                lap += metric[(n1, n2)] * shape(&o);
                            }
                        }
                        lap -= (0..d).map(|m| g_x[m] * kappa[m]).sum::<f64>();
                        out.laplacians.push(lap);
                    }
                }
            }
            Ok(out)
        };

        let data: Vec<CellData> = (0..ncells).into_par_iter().map(build).collect::<Result<_>>()?;
        let mut quad = Self {
            dim: d,
            dims,
            nloc,
            nq,
            ncells,
            cell_elements: Vec::with_capacity(ncells * d),
            basis_ids: Vec::with_capacity(ncells * nloc),
            weights: Vec::with_capacity(ncells * nq),
            eta: Vec::with_capacity(ncells * nq * d),
            x: Vec::with_capacity(ncells * nq * d),
            values: Vec::with_capacity(ncells * nq * nloc),
            grads: Vec::with_capacity(ncells * nq * nloc * d),
            laplacians: Vec::new(),
        };
        for c in data {
            quad.cell_elements.extend(c.elements);
            quad.basis_ids.extend(c.ids);
            quad.weights.extend(c.weights);
            quad.eta.extend(c.eta);
            quad.x.extend(c.x);
            quad.values.extend(c.values);
            quad.grads.extend(c.grads);
            quad.laplacians.extend(c.laplacians);
        }
        Ok(quad)
    }

    pub fn n_space(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn has_laplacians(&self) -> bool {
        !self.laplacians.is_empty()
    }

    /// Solution element multi-index containing cell `c`.
    pub fn cell_element(&self, c: usize) -> &[usize] {
        &self.cell_elements[c * self.dim..(c + 1) * self.dim]
    }

    pub fn basis_ids(&self, c: usize) -> &[usize] {
        &self.basis_ids[c * self.nloc..(c + 1) * self.nloc]
    }

    /// Physical weights (Gauss weight times `|det J|`).
    pub fn weights(&self, c: usize) -> &[f64] {
        &self.weights[c * self.nq..(c + 1) * self.nq]
    }

    pub fn eta(&self, c: usize, qp: usize) -> &[f64] {
        let off = (c * self.nq + qp) * self.dim;
        &self.eta[off..off + self.dim]
    }

    pub fn x(&self, c: usize, qp: usize) -> &[f64] {
        let off = (c * self.nq + qp) * self.dim;
        &self.x[off..off + self.dim]
    }

    /// Basis values at point `qp` of cell `c`.
    pub fn values(&self, c: usize, qp: usize) -> &[f64] {
        let off = (c * self.nq + qp) * self.nloc;
        &self.values[off..off + self.nloc]
    }

    /// Physical gradients, `nloc × d`, row-major.
    pub fn grads(&self, c: usize, qp: usize) -> &[f64] {
        let n = self.nloc * self.dim;
        let off = (c * self.nq + qp) * n;
        &self.grads[off..off + n]
    }

    pub fn laplacians(&self, c: usize, qp: usize) -> &[f64] {
        let off = (c * self.nq + qp) * self.nloc;
        &self.laplacians[off..off + self.nloc]
    }

    /// For every cell, the offset of `(ids[a], ids[b])` within row `ids[a]`
    /// of `pattern`, laid out `[c][a][b]`.
    pub fn row_offsets(&self, pattern: &CsrMatrix) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.ncells * self.nloc * self.nloc);
        for c in 0..self.ncells {
            let ids = self.basis_ids(c);
            for &i in ids {
                let (cols, _) = pattern.row(i);
                for &j in ids {
                    out.push(cols.binary_search(&j).expect("cell pair inside tensor band pattern"));
                }
            }
        }
        out
    }

    /// `∫ ω B_i B_j` with an optional per-point weight `ω` laid out `[c][qp]`.
    pub fn mass_matrix(&self, pattern: &CsrMatrix, offsets: &[usize], omega: Option<&[f64]>) -> CsrMatrix {
        let mut m = pattern.zeros_like();
        let nloc = self.nloc;
        for c in 0..self.ncells {
            let ids = self.basis_ids(c);
            let off = &offsets[c * nloc * nloc..(c + 1) * nloc * nloc];
            let mut local = vec![0.0; nloc * nloc];
            for (qp, &w) in self.weights(c).iter().enumerate() {
                let w = w * omega.map_or(1.0, |o| o[c * self.nq + qp]);
                if w == 0.0 {
                    continue;
                }
                let v = self.values(c, qp);
                for a in 0..nloc {
                    let wa = w * v[a];
                    for b in 0..nloc {
                        local[a * nloc + b] += wa * v[b];
                    }
                }
            }
            scatter(&mut m, ids, off, &local);
        }
        m
    }

    /// `∫ ∇B_i · ∇B_j`.
    pub fn stiffness_matrix(&self, pattern: &CsrMatrix, offsets: &[usize]) -> CsrMatrix {
        let mut m = pattern.zeros_like();
        let (nloc, d) = (self.nloc, self.dim);
        for c in 0..self.ncells {
            let ids = self.basis_ids(c);
            let off = &offsets[c * nloc * nloc..(c + 1) * nloc * nloc];
            let mut local = vec![0.0; nloc * nloc];
            for (qp, &w) in self.weights(c).iter().enumerate() {
                let g = self.grads(c, qp);
                for a in 0..nloc {
                    for b in 0..nloc {
                        let dot: f64 = (0..d).map(|m| g[a * d + m] * g[b * d + m]).sum();
                        local[a * nloc + b] += w * dot;
                    }
                }
            }
            scatter(&mut m, ids, off, &local);
        }
        m
    }

    /// `∫ g B_i` for per-point values `g` laid out `[c][qp]`.
    pub fn load_vector(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_space()];
        for c in 0..self.ncells {
            let ids = self.basis_ids(c);
            for (qp, &w) in self.weights(c).iter().enumerate() {
                let gw = w * g[c * self.nq + qp];
                for (a, &v) in self.values(c, qp).iter().enumerate() {
                    out[ids[a]] += gw * v;
                }
            }
        }
        out
    }
}

fn scatter(m: &mut CsrMatrix, ids: &[usize], offsets: &[usize], local: &[f64]) {
    let n = ids.len();
    for (a, &i) in ids.iter().enumerate() {
        let base = m.row_ptr()[i];
        let vals = m.values_mut();
        for b in 0..n {
            vals[base + offsets[a * n + b]] += local[a * n + b];
        }
    }
}

/// A spatial matrix, either as a Kronecker product of univariate factors
/// (`factors[d-1] ⊗ … ⊗ factors[0]`) or as an assembled sparse matrix.
#[derive(Debug, Clone)]
pub enum SpaceFactor {
    Kron(Arc<Vec<DMatrix<f64>>>),
    Sparse(Arc<CsrMatrix>),
}

impl SpaceFactor {
    pub fn n(&self) -> usize {
        match self {
            Self::Kron(f) => f.iter().map(|m| m.nrows()).product(),
            Self::Sparse(m) => m.nrows(),
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Self::Kron(f) => y.copy_from_slice(&kron_apply(f, x)),
            Self::Sparse(m) => m.matvec(x, y),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Kron(f) => f.iter().skip(1).fold(f[0].clone(), |acc, m| m.kronecker(&acc)),
            Self::Sparse(m) => m.to_dense(),
        }
    }

    /// Sparse form on the tensor band pattern `pattern`.
    pub fn to_csr(&self, pattern: &CsrMatrix) -> CsrMatrix {
        match self {
            Self::Sparse(m) => (**m).clone(),
            Self::Kron(f) => {
                let dims: Vec<usize> = f.iter().map(|m| m.nrows()).collect();
                let mut out = pattern.zeros_like();
                for i in 0..out.nrows() {
                    let mi = multi_index(i, &dims);
                    let r = out.row_range(i);
                    let cols = out.col_idx()[r.clone()].to_vec();
                    for (k, j) in r.zip(cols) {
                        let mj = multi_index(j, &dims);
                        out.values_mut()[k] = (0..dims.len()).map(|l| f[l][(mi[l], mj[l])]).product();
                    }
                }
                out
            }
        }
    }
}

fn multi_index(mut i: usize, dims: &[usize]) -> [usize; 3] {
    let mut m = [0usize; 3];
    for (l, &n) in dims.iter().enumerate() {
        m[l] = i % n;
        i /= n;
    }
    m
}

/// Sum of scaled space factors.
#[derive(Debug, Clone, Default)]
pub struct SpaceOperator {
    pub terms: Vec<(f64, SpaceFactor)>,
}

impl SpaceOperator {
    pub fn single(coef: f64, factor: SpaceFactor) -> Self {
        Self {
            terms: vec![(coef, factor)],
        }
    }

    pub fn n(&self) -> usize {
        self.terms.first().map_or(0, |(_, f)| f.n())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        let mut tmp = vec![0.0; x.len()];
        for (c, f) in &self.terms {
            f.apply(x, &mut tmp);
            y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += c * b);
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        self.terms
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, (c, f)| acc + f.to_dense() * *c)
    }

    pub fn to_csr(&self, pattern: &CsrMatrix) -> CsrMatrix {
        let mut out = pattern.zeros_like();
        for (c, f) in &self.terms {
            out.add_scaled(*c, &f.to_csr(pattern)).expect("factor inside tensor band pattern");
        }
        out
    }
}

/// Pulled-back spatial mass and stiffness.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    pub mass: SpaceOperator,
    pub stiffness: SpaceOperator,
    /// Parametric univariate mass and stiffness per direction.
    pub parametric_mass: Vec<DMatrix<f64>>,
    pub parametric_stiffness: Vec<DMatrix<f64>>,
    pub pattern: CsrMatrix,
}

/// Kronecker-factored when the map is an axis-aligned scaling, assembled
/// cell by cell otherwise.
pub fn spatial_operators(spaces: &[SplineSpace1D], map: &GeometryMap) -> Result<SpatialOperators> {
    let degrees: Vec<usize> = spaces.iter().map(|s| s.degree()).collect();
    let dims: Vec<usize> = spaces.iter().map(|s| s.dimension()).collect();
    let pattern = tensor_band_pattern(&dims, &degrees);
    let uni: Vec<_> = spaces.iter().map(|s| univariate_matrices(s, None)).collect();
    let parametric_mass: Vec<DMatrix<f64>> = uni.iter().map(|u| u.mass.clone()).collect();
    let parametric_stiffness: Vec<DMatrix<f64>> = uni.iter().map(|u| u.stiffness.clone()).collect();
    let (mass, stiffness) = if let Some(scales) = map.affine_diagonal_scales() {
        let vol: f64 = scales.iter().product();
        let mass = SpaceOperator::single(vol, SpaceFactor::Kron(Arc::new(parametric_mass.clone())));
        let stiffness = SpaceOperator {
            terms: (0..spaces.len())
                .map(|l| {
                    let mut f = parametric_mass.clone();
                    f[l] = parametric_stiffness[l].clone();
                    (vol / (scales[l] * scales[l]), SpaceFactor::Kron(Arc::new(f)))
                })
                .collect(),
        };
        (mass, stiffness)
    } else {
        let p = degrees[0];
        let quad = SpaceQuadrature::new(spaces, map, p + 1, None, false)?;
        let offsets = quad.row_offsets(&pattern);
        let m = quad.mass_matrix(&pattern, &offsets, None);
        let k = quad.stiffness_matrix(&pattern, &offsets);
        (
            SpaceOperator::single(1.0, SpaceFactor::Sparse(Arc::new(m))),
            SpaceOperator::single(1.0, SpaceFactor::Sparse(Arc::new(k))),
        )
    };
    Ok(SpatialOperators {
        mass,
        stiffness,
        parametric_mass,
        parametric_stiffness,
        pattern,
    })
}
