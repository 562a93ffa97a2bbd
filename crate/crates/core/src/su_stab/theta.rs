//! Residual-driven activation coefficient Θ on the Greville grid.

use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::{SourceFn, SpaceKind, SpaceTimeQuadrature};
use crate::error::{Error, Result};
use crate::field::evaluate_field;
use crate::geometry::GeometryMap;
use crate::params::Parameters;
use crate::spline::{SplineSpace1D, TensorSpaceTime};

/// Θ̂ as an `N_t × N_s` matrix (row = constrained time index).
#[derive(Debug, Clone)]
pub struct ThetaTensor {
    pub values: DMatrix<f64>,
}

impl ThetaTensor {
    pub fn zeros(n_time: usize, n_space: usize) -> Self {
        Self {
            values: DMatrix::zeros(n_time, n_space),
        }
    }

    /// `θ(η, τ)`: the `(d+1)`-linear interpolant on the spatial Greville
    /// grid and the constrained time Greville points, held constant before
    /// the first of these.
    pub fn interpolate(&self, st: &TensorSpaceTime, eta: &[f64], tau: f64) -> f64 {
        let grids: Vec<Vec<f64>> = st.spatial().iter().map(|s| s.greville()).collect();
        let stencil = super::matrices::multilinear_stencil(&grids, eta);
        let nodes = &st.time().greville()[1..];
        let in_time: Vec<f64> = (0..self.values.nrows())
            .map(|r| stencil.iter().map(|&(i, w)| w * self.values[(r, i)]).sum())
            .collect();
        super::matrices::interp_linear(nodes, &in_time, tau)
    }

    /// CSV with one row per time Greville index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.values.ncols()).map(|i| format!("s{i}")).collect();
        writeln!(w, "t_index,{}", header.join(","))?;
        for r in 0..self.values.nrows() {
            let row: Vec<String> = self.values.row(r).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{r},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Strong residual `C_m ∂_t u - D Δu + c1 u (u - a)(u - 1) + c2 u w - f` at
/// parametric space-time points `(η, τ)`.
pub fn strong_residual(
    params: &Parameters,
    st: &TensorSpaceTime,
    map: &GeometryMap,
    u: &[f64],
    w: &[f64],
    f: &SourceFn,
    points: &[(Vec<f64>, f64)],
) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|(eta, tau)| {
            let us = evaluate_field(u, st, map, eta, *tau, true)?;
            let ws = evaluate_field(w, st, map, eta, *tau, false)?;
            let x = map.eval(eta, crate::geometry::EvalLevel::Value)?.point;
            let t = tau * map.final_time();
            Ok(params.c_m * us.dt - params.d * us.laplacian + params.ionic(us.value, ws.value) - f(&x, eta, t))
        })
        .collect()
}

/// Per-element residual maxima and global solution scales.
#[derive(Debug, Clone)]
pub struct ResidualSummary {
    /// `max |r|` per space-time element, space element fastest.
    pub element_max: Vec<f64>,
    pub u_max: f64,
    pub dt_max: f64,
}

/// Samples the strong residual at every Gauss point of `quad` (which must
/// carry Laplacians).
pub fn residual_summary(
    quad: &SpaceTimeQuadrature,
    st: &TensorSpaceTime,
    params: &Parameters,
    u: &[f64],
    w: &[f64],
    f: &SourceFn,
) -> Result<ResidualSummary> {
    if !quad.space.has_laplacians() {
        return Err(Error::InvalidParameter("residual sampling needs Laplacian data".into()));
    }
    let n = quad.n_dof();
    for v in [u, w] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
    }
    let ne: Vec<usize> = st.spatial().iter().map(|s| s.num_elements()).collect();
    let ne_s: usize = ne.iter().product();
    let nt_el = st.time().num_elements();
    let sq = &quad.space;
    let inv_t = 1.0 / quad.final_time;
    let per_time: Vec<(usize, Vec<f64>, f64, f64)> = (0..quad.time.len())
        .into_par_iter()
        .map(|e| {
            let mut emax = vec![0.0f64; ne_s];
            let (mut umax, mut dmax) = (0.0f64, 0.0f64);
            for c in 0..sq.ncells {
                let uv = quad.local_eval(u, c, e, 0, SpaceKind::Value);
                let ud = quad.local_eval(u, c, e, 1, SpaceKind::Value);
                let ul = quad.local_eval(u, c, e, 0, SpaceKind::Laplacian);
                let wv = quad.local_eval(w, c, e, 0, SpaceKind::Value);
                let el = sq.cell_element(c);
                let mut flat = 0;
                let mut stride = 1;
                for (l, &k) in el.iter().enumerate() {
                    flat += k * stride;
                    stride *= ne[l];
                }
                for qt in 0..quad.time.nq {
                    let t = quad.time_point(e, qt);
                    for qs in 0..sq.nq {
                        let k = qt * sq.nq + qs;
                        let dt = ud[k] * inv_t;
                        let r = params.c_m * dt - params.d * ul[k] + params.ionic(uv[k], wv[k])
                            - f(sq.x(c, qs), sq.eta(c, qs), t);
                        emax[flat] = emax[flat].max(r.abs());
                        umax = umax.max(uv[k].abs());
                        dmax = dmax.max(dt.abs());
                    }
                }
            }
            (quad.time.cells[e].element, emax, umax, dmax)
        })
        .collect();
    let mut element_max = vec![0.0f64; ne_s * nt_el];
    let (mut u_max, mut dt_max) = (0.0f64, 0.0f64);
    for (et, emax, um, dm) in per_time {
        for (o, v) in element_max[ne_s * et..ne_s * (et + 1)].iter_mut().zip(emax) {
            *o = o.max(v);
        }
        u_max = u_max.max(um);
        dt_max = dt_max.max(dm);
    }
    Ok(ResidualSummary {
        element_max,
        u_max,
        dt_max,
    })
}

/// Elements intersecting the support extension `(ξ[i-p], ξ[i+p+1])` of
/// basis function `i`.
fn support_window(space: &SplineSpace1D, i: usize) -> Range<usize> {
    let k = space.knots();
    let p = space.degree();
    let lo = k[i.saturating_sub(p)];
    let hi = k[(i + p + 1).min(k.len() - 1)];
    space.elements_intersecting(lo, hi)
}

fn max_filter(data: &[f64], dims: &[usize], l: usize, windows: &[Range<usize>]) -> Vec<f64> {
    let inner: usize = dims[..l].iter().product();
    let n = dims[l];
    let outer: usize = dims[l + 1..].iter().product();
    let m = windows.len();
    let mut out = vec![0.0f64; inner * m * outer];
    for o in 0..outer {
        for (r, win) in windows.iter().enumerate() {
            let dst = inner * (r + m * o);
            for c in win.clone() {
                let src = inner * (c + n * o);
                for i in 0..inner {
                    out[dst + i] = out[dst + i].max(data[src + i]);
                }
            }
        }
    }
    out
}

/// Θ from a residual summary: support-extension maxima over the global
/// scale `C_m (max|u| / T + max|∂_t u|)`, clamped to 1.
pub fn compute_theta(st: &TensorSpaceTime, params: &Parameters, final_time: f64, summary: &ResidualSummary) -> ThetaTensor {
    let d = st.dim();
    let mut dims: Vec<usize> = st.spatial().iter().map(|s| s.num_elements()).collect();
    dims.push(st.time().num_elements());
    let mut data = summary.element_max.clone();
    let twin: Vec<Range<usize>> = (0..st.n_time()).map(|j| support_window(st.time(), j + 1)).collect();
    data = max_filter(&data, &dims, d, &twin);
    dims[d] = twin.len();
    for l in 0..d {
        let s = &st.spatial()[l];
        let wins: Vec<Range<usize>> = (0..s.dimension()).map(|i| support_window(s, i)).collect();
        data = max_filter(&data, &dims, l, &wins);
        dims[l] = wins.len();
    }
    let den = params.c_m * (summary.u_max / final_time + summary.dt_max);
    let ns = st.n_space();
    let mut warned = false;
    let values = DMatrix::from_fn(st.n_time(), ns, |j, i| {
        let num = data[i + ns * j];
        if den > 0.0 {
            (num / den).min(1.0)
        } else if num == 0.0 {
            0.0
        } else {
            if !warned {
                log::debug!("residual scale vanishes with nonzero residual; stabilization fully active");
                warned = true;
            }
            1.0
        }
    });
    ThetaTensor { values }
}
