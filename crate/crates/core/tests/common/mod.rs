//! Brute-force space-time integration on axis-aligned boxes.
#![allow(dead_code)]

pub mod oracle;

use nalgebra::DMatrix;
use stiga_core::quadrature::GaussLegendre;
use stiga_core::spline::{SplineSpace1D, TensorSpaceTime};

/// Gauss points on `[0, 1]`: `q` per interval between consecutive `cuts`.
pub fn rule(cuts: &[f64], q: usize) -> Vec<(f64, f64)> {
    let g = GaussLegendre::new(q);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .flat_map(|w| g.on_interval(w[0], w[1]).collect::<Vec<_>>())
        .collect()
}

/// Breakpoints, optionally merged with the Greville points.
pub fn cuts(s: &SplineSpace1D, greville: bool) -> Vec<f64> {
    let mut c = s.breakpoints().to_vec();
    if greville {
        c.extend(s.greville());
    }
    c.sort_by(f64::total_cmp);
    c.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    c
}

/// All derivatives up to `nders` of every basis function at `x`.
pub fn dense_ders(s: &SplineSpace1D, x: f64, nders: usize) -> Vec<Vec<f64>> {
    let (first, d) = s.eval_ders(x, nders);
    let mut out = vec![vec![0.0; s.dimension()]; nders + 1];
    for k in 0..=nders {
        for (a, v) in d[k].iter().enumerate() {
            out[k][first + a] = *v;
        }
    }
    out
}

/// Values of one quadrature point, with the time index already constrained.
pub struct Point<'a> {
    pub eta: &'a [f64],
    pub x: &'a [f64],
    pub s: f64,
    pub t: f64,
    pub weight: f64,
    /// `phi[k][i]`: `k`-th physical time derivative of basis `i`.
    pub phi: &'a [Vec<f64>],
    /// `grad[l][i]`: physical derivative in direction `l` of basis `i`.
    pub grad: &'a [Vec<f64>],
}

/// Space-time quadrature on `∏ (0, extents_l) × (0, T)`.
pub struct Brute<'a> {
    pub st: &'a TensorSpaceTime,
    pub extents: Vec<f64>,
    pub final_time: f64,
    space_rules: Vec<Vec<(f64, f64)>>,
    time_rule: Vec<(f64, f64)>,
}

impl<'a> Brute<'a> {
    pub fn new(st: &'a TensorSpaceTime, extents: &[f64], final_time: f64, q: usize, greville: bool) -> Self {
        Self {
            st,
            extents: extents.to_vec(),
            final_time,
            space_rules: st.spatial().iter().map(|s| rule(&cuts(s, greville), q)).collect(),
            time_rule: rule(&cuts(st.time(), greville), q),
        }
    }

    /// Calls `f` at every quadrature point.
    pub fn for_each(&self, nders_t: usize, mut f: impl FnMut(&Point)) {
        let st = self.st;
        let d = st.dim();
        let ns = st.n_space();
        let nt = st.n_time();
        let n = ns * nt;
        let dims: Vec<usize> = self.space_rules.iter().map(Vec::len).collect();
        let npts: usize = dims.iter().product();
        let jac: f64 = self.extents.iter().product();
        let mut eta = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut phi = vec![vec![0.0; n]; nders_t + 1];
        let mut grad = vec![vec![0.0; n]; d];
        let mut sval = vec![0.0; ns];
        let mut sgrad = vec![vec![0.0; ns]; d];
        for k in 0..npts {
            let mut rem = k;
            let mut ws = jac;
            for l in 0..d {
                let (e, w) = self.space_rules[l][rem % dims[l]];
                rem /= dims[l];
                eta[l] = e;
                x[l] = e * self.extents[l];
                ws *= w;
            }
            let uni: Vec<Vec<Vec<f64>>> = (0..d).map(|l| dense_ders(&st.spatial()[l], eta[l], 1)).collect();
            for i in 0..ns {
                let idx = st.space_multi_index(i);
                let mut v = 1.0;
                for l in 0..d {
                    v *= uni[l][0][idx[l]];
                }
                sval[i] = v;
                for m in 0..d {
                    let mut g = 1.0;
                    for l in 0..d {
                        g *= uni[l][(l == m) as usize][idx[l]];
                    }
                    sgrad[m][i] = g / self.extents[m];
                }
            }
            for &(s, wt) in &self.time_rule {
                let tb = dense_ders(st.time(), s, nders_t);
                for j in 0..nt {
                    for i in 0..ns {
                        let g = i + ns * j;
                        for (kk, row) in phi.iter_mut().enumerate() {
                            row[g] = sval[i] * tb[kk][j + 1] / self.final_time.powi(kk as i32);
                        }
                        for m in 0..d {
                            grad[m][g] = sgrad[m][i] * tb[0][j + 1];
                        }
                    }
                }
                f(&Point {
                    eta: &eta,
                    x: &x,
                    s,
                    t: s * self.final_time,
                    weight: ws * wt * self.final_time,
                    phi: &phi,
                    grad: &grad,
                });
            }
        }
    }

    /// `∫∫ form(point, i, j)` over all dof pairs, test index `i` in rows.
    pub fn matrix(&self, nders_t: usize, form: impl Fn(&Point, usize, usize) -> f64) -> DMatrix<f64> {
        self.weighted_matrix(nders_t, |_| (), |p, _, i, j| form(p, i, j))
    }

    /// Like [`Brute::matrix`] with a coefficient computed once per point.
    pub fn weighted_matrix<C>(
        &self,
        nders_t: usize,
        coef: impl Fn(&Point) -> C,
        form: impl Fn(&Point, &C, usize, usize) -> f64,
    ) -> DMatrix<f64> {
        let n = self.st.n_dof();
        let mut m = DMatrix::zeros(n, n);
        self.for_each(nders_t, |p| {
            let nz: Vec<usize> = (0..n).filter(|&i| p.phi[0][i] != 0.0 || p.phi[nders_t][i] != 0.0).collect();
            let c = coef(p);
            for &i in &nz {
                for &j in &nz {
                    m[(i, j)] += p.weight * form(p, &c, i, j);
                }
            }
        });
        m
    }

    pub fn vector(&self, form: impl Fn(&Point, usize) -> f64) -> Vec<f64> {
        let n = self.st.n_dof();
        let mut v = vec![0.0; n];
        self.for_each(0, |p| {
            for (i, vi) in v.iter_mut().enumerate() {
                if p.phi[0][i] != 0.0 {
                    *vi += p.weight * form(p, i);
                }
            }
        });
        v
    }
}

/// Reproducible pseudo-random values in `[lo, hi)`.
pub fn scrambled(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            lo + (hi - lo) * ((x >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

pub fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

pub fn max_rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
