use rayon::prelude::*;

use crate::assembly::{SpaceKind, SpaceTimeQuadrature};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::spline::TensorSpaceTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Error {
    /// `‖u_h - u_ex‖` over `Ω × (0, T)`.
    pub absolute: f64,
    pub exact_norm: f64,
    /// `absolute / exact_norm`, or `absolute` when the exact norm vanishes.
    pub value: f64,
    pub is_relative: bool,
}

/// Space-time L2 error against `exact(x, t)` with `p + 2` Gauss points per
/// direction.
pub fn l2_error(
    coeffs: &[f64],
    exact: &(dyn Fn(&[f64], f64) -> f64 + Sync),
    st: &TensorSpaceTime,
    map: &GeometryMap,
) -> Result<L2Error> {
    if coeffs.len() != st.n_dof() {
        return Err(Error::DimensionMismatch {
            expected: st.n_dof(),
            actual: coeffs.len(),
        });
    }
    let p = st.spatial()[0].degree().max(st.time().degree());
    let quad = SpaceTimeQuadrature::new(st, map, p + 2, false, 0)?;
    let sq = &quad.space;
    let (err2, ex2) = (0..quad.time.len())
        .into_par_iter()
        .map(|e| {
            let mut acc = (0.0, 0.0);
            for c in 0..sq.ncells {
                let uh = quad.local_eval(coeffs, c, e, 0, SpaceKind::Value);
                let ws = sq.weights(c);
                for qt in 0..quad.time.nq {
                    let t = quad.time_point(e, qt);
                    let wt = quad.time_weight(e, qt);
                    for qs in 0..sq.nq {
                        let ue = exact(sq.x(c, qs), t);
                        let w = wt * ws[qs];
                        let d = uh[qt * sq.nq + qs] - ue;
                        acc.0 += w * d * d;
                        acc.1 += w * ue * ue;
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let absolute = err2.sqrt();
    let exact_norm = ex2.sqrt();
    let is_relative = exact_norm > 0.0;
    Ok(L2Error {
        absolute,
        exact_norm,
        value: if is_relative { absolute / exact_norm } else { absolute },
        is_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_approximation_has_unit_error() {
        let st = TensorSpaceTime::uniform(2, &[3], 2, 3).unwrap();
        let map = GeometryMap::identity(1, 2.0).unwrap();
        let e = l2_error(&vec![0.0; st.n_dof()], &|x: &[f64], t: f64| x[0] * t, &st, &map).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14);
        assert!(e.is_relative);
    }

    #[test]
    fn zero_exact_reports_absolute() {
        let st = TensorSpaceTime::uniform(1, &[2], 1, 2).unwrap();
        let map = GeometryMap::identity(1, 1.0).unwrap();
        let e = l2_error(&vec![0.0; st.n_dof()], &|_: &[f64], _| 0.0, &st, &map).unwrap();
        assert!(!e.is_relative);
        assert_eq!(e.value, 0.0);
    }
}
