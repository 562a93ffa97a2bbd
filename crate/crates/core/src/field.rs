//! Pointwise evaluation of space-time spline fields.

use crate::error::{Error, Result};
use crate::geometry::{EvalLevel, GeometryMap};
use crate::spline::TensorSpaceTime;

/// Field data at one point. `dt` is the physical time derivative; `grad`
/// and `laplacian` are taken in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    pub laplacian: f64,
}

/// Evaluates `u(F(η), T τ)` for coefficients of the constrained space.
/// With `derivatives` false only `value` is filled.
pub fn evaluate_field(
    coeffs: &[f64],
    st: &TensorSpaceTime,
    map: &GeometryMap,
    eta: &[f64],
    tau: f64,
    derivatives: bool,
) -> Result<FieldSample> {
    let d = st.dim();
    if coeffs.len() != st.n_dof() {
        return Err(Error::DimensionMismatch {
            expected: st.n_dof(),
            actual: coeffs.len(),
        });
    }
    if eta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: eta.len(),
        });
    }
    for &v in eta.iter().chain(std::iter::once(&tau)) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain { value: v });
        }
    }
    let nd = if derivatives { 2 } else { 0 };
    let sb: Vec<(usize, Vec<Vec<f64>>)> = st.spatial().iter().zip(eta).map(|(s, &x)| s.eval_ders(x, nd)).collect();
    let (tfirst, tders) = st.time().eval_ders(tau, if derivatives { 1 } else { 0 });
    let locals: Vec<usize> = st.spatial().iter().map(|s| s.degree() + 1).collect();
    let dims = st.spatial_dims();
    let nloc: usize = locals.iter().product();
    let ns = st.n_space();

    // time contraction: coefficient of each local spatial function
    let mut cval = vec![0.0; nloc];
    let mut cdt = vec![0.0; nloc];
    let mut sids = vec![0usize; nloc];
    let mut locs = vec![[0usize; 3]; nloc];
    for a in 0..nloc {
        let mut rem = a;
        let mut id = 0;
        let mut stride = 1;
        for l in 0..d {
            locs[a][l] = rem % locals[l];
            rem /= locals[l];
            id += (sb[l].0 + locs[a][l]) * stride;
            stride *= dims[l];
        }
        sids[a] = id;
    }
    for (at, bt) in tders[0].iter().enumerate() {
        let full = tfirst + at;
        if full == 0 {
            continue;
        }
        for a in 0..nloc {
            let c = coeffs[sids[a] + ns * (full - 1)];
            cval[a] += bt * c;
            if derivatives {
                cdt[a] += tders[1][at] * c;
            }
        }
    }
    let shape = |a: usize, orders: &[usize; 3]| -> f64 { (0..d).map(|l| sb[l].1[orders[l]][locs[a][l]]).product() };
    let value: f64 = (0..nloc).map(|a| cval[a] * shape(a, &[0, 0, 0])).sum();
    if !derivatives {
        return Ok(FieldSample {
            value,
            dt: 0.0,
            grad: Vec::new(),
            laplacian: 0.0,
        });
    }
    let dt = (0..nloc).map(|a| cdt[a] * shape(a, &[0, 0, 0])).sum::<f64>() / map.final_time();
    let mut g_eta = vec![0.0; d];
    let mut h_eta = nalgebra::DMatrix::<f64>::zeros(d, d);
    for a in 0..nloc {
        for n in 0..d {
            let mut o = [0usize; 3];
            o[n] = 1;
            g_eta[n] += cval[a] * shape(a, &o);
            for n2 in 0..d {
                let mut o2 = o;
                o2[n2] += 1;
                h_eta[(n, n2)] += cval[a] * shape(a, &o2);
            }
        }
    }
    let geo = map.eval(eta, EvalLevel::Hessian)?;
    let jac = geo.jacobian.expect("jacobian requested");
    let ginv = jac.clone().try_inverse().ok_or_else(|| Error::SingularGeometry {
        det: jac.determinant(),
        point: eta.to_vec(),
    })?;
    let grad: Vec<f64> = (0..d).map(|m| (0..d).map(|n| ginv[(n, m)] * g_eta[n]).sum()).collect();
    let metric = &ginv * ginv.transpose();
    let hess = geo.hessians.expect("hessians requested");
    let mut laplacian = metric.component_mul(&h_eta).sum();
    for m in 0..d {
        laplacian -= grad[m] * metric.component_mul(&hess[m]).sum();
    }
    Ok(FieldSample {
        value,
        dt,
        grad,
        laplacian,
    })
}
