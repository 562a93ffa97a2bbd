//! Space-time quadrature, the reaction mass matrix and load vectors.

use rayon::prelude::*;

use super::cells::Cells1D;
use super::space::SpaceQuadrature;
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::sparse::{band_pattern, tensor_band_pattern, CsrMatrix, KronLayout};
use crate::spline::TensorSpaceTime;

/// Which spatial quantity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Value,
    Laplacian,
}

/// Source `f(x, η, t)` in physical space `x`, parametric space `η` and
/// physical time `t`.
pub type SourceFn<'a> = dyn Fn(&[f64], &[f64], f64) -> f64 + Sync + 'a;

/// Tensor quadrature on spatial cells × time elements.
#[derive(Debug, Clone)]
pub struct SpaceTimeQuadrature {
    pub space: SpaceQuadrature,
    pub time: Cells1D,
    pub final_time: f64,
    pub n_space: usize,
    pub n_time: usize,
}

impl SpaceTimeQuadrature {
    /// `q` Gauss points per direction; time derivatives up to `time_nders`.
    pub fn new(
        st: &TensorSpaceTime,
        map: &GeometryMap,
        q: usize,
        with_laplacian: bool,
        time_nders: usize,
    ) -> Result<Self> {
        let space = SpaceQuadrature::new(st.spatial(), map, q, None, with_laplacian)?;
        let time = Cells1D::new(st.time(), q, time_nders, &[]);
        Ok(Self {
            space,
            time,
            final_time: map.final_time(),
            n_space: st.n_space(),
            n_time: st.n_time(),
        })
    }

    pub fn n_dof(&self) -> usize {
        self.n_space * self.n_time
    }

    /// Physical time weight.
    #[inline]
    pub fn time_weight(&self, e: usize, qt: usize) -> f64 {
        self.final_time * self.time.cells[e].weights[qt]
    }

    #[inline]
    pub fn time_point(&self, e: usize, qt: usize) -> f64 {
        self.final_time * self.time.cells[e].points[qt]
    }

    /// Values at the `nq_s · nq_t` points of block `(c, e)`, laid out
    /// `[qt][qs]`. `time_order` derivatives are parametric (`∂_τ`).
    pub fn local_eval(&self, coeffs: &[f64], c: usize, e: usize, time_order: usize, kind: SpaceKind) -> Vec<f64> {
        let sq = &self.space;
        let ntl = self.time.nloc;
        let nqt = self.time.nq;
        let ids = sq.basis_ids(c);
        let first = self.time.cells[e].first;
        // contract time first: v[qt][a_s]
        let mut v = vec![0.0; nqt * sq.nloc];
        for at in 0..ntl {
            let full = first + at;
            if full == 0 {
                continue;
            }
            let col = self.n_space * (full - 1);
            for qt in 0..nqt {
                let bt = self.time.der(e, qt, time_order, at);
                if bt == 0.0 {
                    continue;
                }
                let row = &mut v[qt * sq.nloc..(qt + 1) * sq.nloc];
                for (r, &id) in row.iter_mut().zip(ids) {
                    *r += bt * coeffs[col + id];
                }
            }
        }
        let mut out = vec![0.0; nqt * sq.nq];
        for qs in 0..sq.nq {
            let shape = match kind {
                SpaceKind::Value => sq.values(c, qs),
                SpaceKind::Laplacian => sq.laplacians(c, qs),
            };
            for qt in 0..nqt {
                let row = &v[qt * sq.nloc..(qt + 1) * sq.nloc];
                out[qt * sq.nq + qs] = row.iter().zip(shape).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    /// Constrained time rows `lo..=hi` touched by time cell `e`.
    fn time_rows(&self, e: usize) -> (usize, usize) {
        let first = self.time.cells[e].first;
        let p = self.time.nloc - 1;
        (first.saturating_sub(1), (first + p - 1).min(self.n_time - 1))
    }

    /// `∫∫ g B_i` for `g` evaluated per block by `g(c, e) -> [qt][qs]`.
    pub fn load_vector(&self, g: impl Fn(usize, usize) -> Vec<f64> + Sync) -> Vec<f64> {
        let ns = self.n_space;
        let sq = &self.space;
        let blocks: Vec<(usize, Vec<f64>)> = (0..self.time.len())
            .into_par_iter()
            .map(|e| {
                let (lo, hi) = self.time_rows(e);
                let first = self.time.cells[e].first;
                let mut local = vec![0.0; ns * (hi + 1 - lo)];
                for c in 0..sq.ncells {
                    let vals = g(c, e);
                    let ids = sq.basis_ids(c);
                    let ws = sq.weights(c);
                    for qt in 0..self.time.nq {
                        let wt = self.time_weight(e, qt);
                        // spatial load at this time point
                        let mut sload = vec![0.0; sq.nloc];
                        for qs in 0..sq.nq {
                            let gw = vals[qt * sq.nq + qs] * ws[qs] * wt;
                            if gw == 0.0 {
                                continue;
                            }
                            for (s, v) in sload.iter_mut().zip(sq.values(c, qs)) {
                                *s += gw * v;
                            }
                        }
                        for at in 0..self.time.nloc {
                            let full = first + at;
                            if full == 0 {
                                continue;
                            }
                            let bt = self.time.der(e, qt, 0, at);
                            let off = ns * (full - 1 - lo);
                            for (a, &id) in ids.iter().enumerate() {
                                local[off + id] += bt * sload[a];
                            }
                        }
                    }
                }
                (lo, local)
            })
            .collect();
        let mut out = vec![0.0; self.n_dof()];
        for (lo, local) in blocks {
            for (o, v) in out[ns * lo..].iter_mut().zip(local) {
                *o += v;
            }
        }
        out
    }

    /// Load vector of a source function.
    pub fn source_vector(&self, f: &SourceFn) -> Vec<f64> {
        let sq = &self.space;
        self.load_vector(|c, e| {
            let mut vals = vec![0.0; self.time.nq * sq.nq];
            for qt in 0..self.time.nq {
                let t = self.time_point(e, qt);
                for qs in 0..sq.nq {
                    vals[qt * sq.nq + qs] = f(sq.x(c, qs), sq.eta(c, qs), t);
                }
            }
            vals
        })
    }
}

/// Space-time sparse assembly on the Kronecker band pattern.
#[derive(Debug, Clone)]
pub struct SpaceTimeAssembler {
    pub quad: SpaceTimeQuadrature,
    pub layout: KronLayout,
    space_offsets: Vec<usize>,
}

impl SpaceTimeAssembler {
    pub fn new(st: &TensorSpaceTime, map: &GeometryMap, with_laplacian: bool) -> Result<Self> {
        let ps = st.spatial()[0].degree();
        let pt = st.time().degree();
        let q = ps.max(pt) + 1;
        let quad = SpaceTimeQuadrature::new(st, map, q, with_laplacian, 1)?;
        let space_pattern = tensor_band_pattern(&st.spatial_dims(), &vec![ps; st.dim()]);
        let layout = KronLayout::new(band_pattern(st.n_time(), pt), space_pattern);
        let space_offsets = quad.space.row_offsets(layout.space_pattern());
        Ok(Self {
            quad,
            layout,
            space_offsets,
        })
    }

    /// `∫∫ C B_i B_j` where `C` is given per block by `coef(c, e) -> [qt][qs]`.
    pub fn weighted_mass(&self, coef: impl Fn(usize, usize) -> Vec<f64> + Sync) -> CsrMatrix {
        let quad = &self.quad;
        let sq = &quad.space;
        let ns = quad.n_space;
        let pt = quad.time.nloc - 1;
        let nloc = sq.nloc;
        let space_pattern = self.layout.space_pattern();
        let row_len: Vec<usize> = (0..ns).map(|i| space_pattern.row_range(i).len()).collect();
        let mut m = self.layout.empty();
        let row_ptr = m.row_ptr().to_vec();
        // cells e and e + pt + 1 touch disjoint time rows
        for color in 0..=pt {
            let cells: Vec<usize> = (color..quad.time.len()).step_by(pt + 1).collect();
            let mut slices = Vec::with_capacity(cells.len());
            let mut rest: &mut [f64] = m.values_mut();
            let mut consumed = 0;
            for &e in &cells {
                let (lo, hi) = quad.time_rows(e);
                let (s, t) = (row_ptr[ns * lo], row_ptr[ns * (hi + 1)]);
                let tmp = std::mem::take(&mut rest);
                let (_, tail) = tmp.split_at_mut(s - consumed);
                let (mine, tail) = tail.split_at_mut(t - s);
                slices.push((e, s, mine));
                rest = tail;
                consumed = t;
            }
            slices.into_par_iter().for_each(|(e, base, vals)| {
                let first = quad.time.cells[e].first;
                let nqt = quad.time.nq;
                let mut pq = vec![0.0; nqt * nloc * nloc];
                for c in 0..sq.ncells {
                    let cv = coef(c, e);
                    let ws = sq.weights(c);
                    pq.iter_mut().for_each(|v| *v = 0.0);
                    for qt in 0..nqt {
                        let p = &mut pq[qt * nloc * nloc..(qt + 1) * nloc * nloc];
                        for qs in 0..sq.nq {
                            let w = ws[qs] * cv[qt * sq.nq + qs];
                            if w == 0.0 {
                                continue;
                            }
                            let v = sq.values(c, qs);
                            for a in 0..nloc {
                                let wa = w * v[a];
                                for b in a..nloc {
                                    p[a * nloc + b] += wa * v[b];
                                }
                            }
                        }
                    }
                    let ids = sq.basis_ids(c);
                    let offs = &self.space_offsets[c * nloc * nloc..(c + 1) * nloc * nloc];
                    for at in 0..=pt {
                        let fi = first + at;
                        if fi == 0 {
                            continue;
                        }
                        let it = fi - 1;
                        for bt in 0..=pt {
                            let fj = first + bt;
                            if fj == 0 {
                                continue;
                            }
                            let jt = fj - 1;
                            let kt = jt - it.saturating_sub(pt);
                            let mut tw = vec![0.0; nqt];
                            for (qt, t) in tw.iter_mut().enumerate() {
                                *t = quad.time_weight(e, qt) * quad.time.der(e, qt, 0, at) * quad.time.der(e, qt, 0, bt);
                            }
                            for a in 0..nloc {
                                let row = ids[a] + ns * it;
                                let rbase = row_ptr[row] - base + kt * row_len[ids[a]];
                                for b in 0..nloc {
                                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                                    let val: f64 = (0..nqt).map(|qt| tw[qt] * pq[qt * nloc * nloc + lo * nloc + hi]).sum();
                                    vals[rbase + offs[a * nloc + b]] += val;
                                }
                            }
                        }
                    }
                }
            });
        }
        m
    }

    /// Reaction mass `M_R` for `C = coef(u, w)` evaluated from the iterates.
    pub fn reaction_mass(
        &self,
        u: &[f64],
        w: &[f64],
        coef: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Result<CsrMatrix> {
        let n = self.quad.n_dof();
        for v in [u, w] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: v.len(),
                });
            }
        }
        Ok(self.weighted_mass(|c, e| {
            let uv = self.quad.local_eval(u, c, e, 0, SpaceKind::Value);
            let wv = self.quad.local_eval(w, c, e, 0, SpaceKind::Value);
            uv.iter().zip(&wv).map(|(&a, &b)| coef(a, b)).collect()
        }))
    }
}
