//! Spline geometry maps `F: (0,1)^d -> Ω` and the space-time map
//! `G(η, τ) = (F(η), T τ)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spline::{KnotVector, SplineSpace1D};

/// Angular elements of the fitted ellipse annulus.
pub const ELLIPSE_ANGULAR_ELEMENTS: usize = 64;
/// Boundary samples per knot span used by the least-squares fit.
pub const ELLIPSE_SAMPLES_PER_SPAN: usize = 64;

/// Semi-axes `(a_o, b_o, a_i, b_i)` of the shipped annulus.
pub const ELLIPSE_AXES: (f64, f64, f64, f64) = (0.75, 0.125, 0.375, 0.0625);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalLevel {
    Value,
    Jacobian,
    Hessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinGeometry {
    UnitInterval,
    UnitSquare,
    UnitCube,
    EllipseAnnulus,
}

impl std::str::FromStr for BuiltinGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_interval" => Ok(Self::UnitInterval),
            "unit_square" => Ok(Self::UnitSquare),
            "unit_cube" => Ok(Self::UnitCube),
            "ellipse_annulus" => Ok(Self::EllipseAnnulus),
            other => Err(Error::Geometry(format!("unknown geometry '{other}'"))),
        }
    }
}

/// Result of [`GeometryMap::eval`]. `hessians[m]` is the Hessian of the
/// `m`-th component of `F`.
#[derive(Debug, Clone)]
pub struct MapEval {
    pub point: Vec<f64>,
    pub jacobian: Option<DMatrix<f64>>,
    pub hessians: Option<Vec<DMatrix<f64>>>,
}

impl MapEval {
    pub fn det(&self) -> Option<f64> {
        self.jacobian.as_ref().map(|j| j.determinant())
    }
}

#[derive(Debug, Clone)]
pub struct GeometryMap {
    spaces: Vec<SplineSpace1D>,
    /// `N_s × d`, row-major, colexicographic rows.
    control_points: Vec<f64>,
    final_time: f64,
}

impl GeometryMap {
    pub fn new(spaces: Vec<SplineSpace1D>, control_points: Vec<f64>, final_time: f64) -> Result<Self> {
        let d = spaces.len();
        if d == 0 || d > 3 {
            return Err(Error::Geometry(format!("unsupported dimension {d}")));
        }
        let n: usize = spaces.iter().map(|s| s.dimension()).product();
        if control_points.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                actual: control_points.len(),
            });
        }
        if !(final_time > 0.0) {
            return Err(Error::Geometry("final time must be positive".into()));
        }
        Ok(Self {
            spaces,
            control_points,
            final_time,
        })
    }

    pub fn builtin(kind: BuiltinGeometry, final_time: f64) -> Result<Self> {
        let map = match kind {
            BuiltinGeometry::UnitInterval => Self::identity(1, final_time)?,
            BuiltinGeometry::UnitSquare => Self::identity(2, final_time)?,
            BuiltinGeometry::UnitCube => Self::identity(3, final_time)?,
            BuiltinGeometry::EllipseAnnulus => Self::ellipse_annulus(ELLIPSE_ANGULAR_ELEMENTS, final_time)?,
        };
        map.validate(3)?;
        Ok(map)
    }

    /// Identity on `(0,1)^d`: one linear element per direction with the
    /// Greville grid as control net.
    pub fn identity(d: usize, final_time: f64) -> Result<Self> {
        Self::affine_box(&vec![1.0; d], final_time)
    }

    /// `x_l = extents[l] · η_l`.
    pub fn affine_box(extents: &[f64], final_time: f64) -> Result<Self> {
        let d = extents.len();
        let spaces = (0..d)
            .map(|_| SplineSpace1D::uniform(1, 1))
            .collect::<Result<Vec<_>>>()?;
        let n = 1usize << d;
        let mut cps = Vec::with_capacity(n * d);
        for i in 0..n {
            for (l, e) in extents.iter().enumerate() {
                cps.push(if (i >> l) & 1 == 1 { *e } else { 0.0 });
            }
        }
        Self::new(spaces, cps, final_time)
    }

    /// Degree-2 approximation of the elliptic annulus; `η_1` runs clockwise
    /// around the ellipses starting on the positive x-axis, `η_2` from the
    /// inner to the outer boundary.
    pub fn ellipse_annulus(angular_elements: usize, final_time: f64) -> Result<Self> {
        let (ao, bo, ai, bi) = ELLIPSE_AXES;
        let ang = SplineSpace1D::uniform(2, angular_elements)?;
        let rad = SplineSpace1D::uniform(2, 1)?;
        let inner = fit_closed_curve(&ang, ai, bi)?;
        let outer = fit_closed_curve(&ang, ao, bo)?;
        let n = ang.dimension();
        let mut cps = vec![0.0; n * 3 * 2];
        for i in 0..n {
            for c in 0..2 {
                let (pi, po) = (inner[2 * i + c], outer[2 * i + c]);
                cps[2 * i + c] = pi;
                cps[2 * (i + n) + c] = 0.5 * (pi + po);
                cps[2 * (i + 2 * n) + c] = po;
            }
        }
        Self::new(vec![ang, rad], cps, final_time)
    }

    pub fn dim(&self) -> usize {
        self.spaces.len()
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn spaces(&self) -> &[SplineSpace1D] {
        &self.spaces
    }

    pub fn control_points(&self) -> &[f64] {
        &self.control_points
    }

    /// `G(η, τ) = (F(η), T τ)`.
    pub fn space_time_point(&self, eta: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
        Ok((self.eval(eta, EvalLevel::Value)?.point, self.final_time * tau))
    }

    pub fn eval(&self, eta: &[f64], level: EvalLevel) -> Result<MapEval> {
        let d = self.dim();
        if eta.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: eta.len(),
            });
        }
        for &e in eta {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Domain { value: e });
            }
        }
        let nders = match level {
            EvalLevel::Value => 0,
            EvalLevel::Jacobian => 1,
            EvalLevel::Hessian => 2,
        };
        let basis: Vec<(usize, Vec<Vec<f64>>)> = self
            .spaces
            .iter()
            .zip(eta)
            .map(|(s, &x)| {
                let nd = nders.min(s.degree());
                let (first, mut ders) = s.eval_ders(x, nd);
                while ders.len() <= nders {
                    ders.push(vec![0.0; s.degree() + 1]);
                }
                (first, ders)
            })
            .collect();
        let mut point = vec![0.0; d];
        let mut jac = DMatrix::<f64>::zeros(d, d);
        let mut hess = vec![DMatrix::<f64>::zeros(d, d); d];
        let dims: Vec<usize> = self.spaces.iter().map(|s| s.dimension()).collect();
        let locals: Vec<usize> = self.spaces.iter().map(|s| s.degree() + 1).collect();
        let nloc: usize = locals.iter().product();
        let mut orders = vec![0usize; d];
        for a in 0..nloc {
            let mut rem = a;
            let mut gidx = 0;
            let mut stride = 1;
            let mut local = [0usize; 3];
            for l in 0..d {
                local[l] = rem % locals[l];
                rem /= locals[l];
                gidx += (basis[l].0 + local[l]) * stride;
                stride *= dims[l];
            }
            let cp = &self.control_points[gidx * d..gidx * d + d];
            let shape = |orders: &[usize]| -> f64 {
                (0..d).map(|l| basis[l].1[orders[l]][local[l]]).product()
            };
            orders.iter_mut().for_each(|o| *o = 0);
            let v = shape(&orders);
            for m in 0..d {
                point[m] += v * cp[m];
            }
            if nders >= 1 {
                for n in 0..d {
                    orders.iter_mut().for_each(|o| *o = 0);
                    orders[n] = 1;
                    let dn = shape(&orders);
                    for m in 0..d {
                        jac[(m, n)] += dn * cp[m];
                    }
                }
            }
            if nders >= 2 {
                for n1 in 0..d {
                    for n2 in n1..d {
                        orders.iter_mut().for_each(|o| *o = 0);
                        orders[n1] += 1;
                        orders[n2] += 1;
                        let dd = shape(&orders);
                        for (m, h) in hess.iter_mut().enumerate() {
                            h[(n1, n2)] += dd * cp[m];
                            if n1 != n2 {
                                h[(n2, n1)] += dd * cp[m];
                            }
                        }
                    }
                }
            }
        }
        let jacobian = if nders >= 1 {
            let det = jac.determinant();
            let scale: f64 = jac.column_iter().map(|c| c.norm()).product();
            if det.abs() < 1e-12 * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
                return Err(Error::SingularGeometry {
                    det,
                    point: eta.to_vec(),
                });
            }
            Some(jac)
        } else {
            None
        };
        Ok(MapEval {
            point,
            jacobian,
            hessians: (nders >= 2).then_some(hess),
        })
    }

    /// Checks `det J > 0` at `q` Gauss points per direction on every element.
    pub fn validate(&self, q: usize) -> Result<()> {
        let rule = GaussLegendre::new(q);
        let per_dir: Vec<Vec<f64>> = self
            .spaces
            .iter()
            .map(|s| {
                (0..s.num_elements())
                    .flat_map(|e| {
                        let (a, b) = s.element(e);
                        rule.on_interval(a, b).map(|(x, _)| x).collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        let total: usize = per_dir.iter().map(|v| v.len()).product();
        let mut eta = vec![0.0; self.dim()];
        for mut k in 0..total {
            for (l, pts) in per_dir.iter().enumerate() {
                eta[l] = pts[k % pts.len()];
                k /= pts.len();
            }
            let ev = self.eval(&eta, EvalLevel::Jacobian)?;
            let det = ev.det().unwrap_or(0.0);
            if det <= 0.0 {
                return Err(Error::SingularGeometry {
                    det,
                    point: eta.clone(),
                });
            }
        }
        Ok(())
    }

    /// Parametric averages of `det J` and of the diagonal entries of
    /// `det J · J^{-1} J^{-ᵀ}`, the coefficients that multiply the mass and
    /// the per-direction stiffness after pull-back.
    pub fn mean_metric(&self) -> Result<(f64, Vec<f64>)> {
        let d = self.dim();
        let rule = GaussLegendre::new(self.spaces.iter().map(|s| s.degree()).max().unwrap_or(1) + 2);
        let per_dir: Vec<Vec<(f64, f64)>> = self
            .spaces
            .iter()
            .map(|s| (0..s.num_elements()).flat_map(|e| {
                let (a, b) = s.element(e);
                rule.on_interval(a, b).collect::<Vec<_>>()
            }).collect())
            .collect();
        let total: usize = per_dir.iter().map(|v| v.len()).product();
        let (mut det_mean, mut diag) = (0.0, vec![0.0; d]);
        let mut eta = vec![0.0; d];
        for mut k in 0..total {
            let mut w = 1.0;
            for (l, pts) in per_dir.iter().enumerate() {
                let (x, wx) = pts[k % pts.len()];
                eta[l] = x;
                w *= wx;
                k /= pts.len();
            }
            let jac = self.eval(&eta, EvalLevel::Jacobian)?.jacobian.expect("jacobian requested");
            let det = jac.determinant();
            let inv = jac.try_inverse().ok_or_else(|| Error::SingularGeometry {
                det,
                point: eta.clone(),
            })?;
            let g = &inv * inv.transpose();
            det_mean += w * det;
            for (l, dl) in diag.iter_mut().enumerate() {
                *dl += w * det * g[(l, l)];
            }
        }
        Ok((det_mean, diag))
    }

    /// If `F(η) = offset + diag(scales) η`, returns the scales; such maps
    /// keep spatial matrices in Kronecker form.
    pub fn affine_diagonal_scales(&self) -> Option<Vec<f64>> {
        let d = self.dim();
        let grev: Vec<Vec<f64>> = self.spaces.iter().map(|s| s.greville()).collect();
        let dims: Vec<usize> = self.spaces.iter().map(|s| s.dimension()).collect();
        let n: usize = dims.iter().product();
        let origin = &self.control_points[..d];
        // scale from the last function along each axis
        let mut scales = vec![0.0; d];
        let mut stride = 1;
        for l in 0..d {
            let idx = (dims[l] - 1) * stride;
            scales[l] = self.control_points[idx * d + l] - origin[l];
            stride *= dims[l];
        }
        let size = scales.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-300);
        for i in 0..n {
            let mut rem = i;
            let mut multi = [0usize; 3];
            for (l, dl) in dims.iter().enumerate() {
                multi[l] = rem % dl;
                rem /= dl;
            }
            for m in 0..d {
                let expected = origin[m] + scales[m] * grev[m][multi[m]];
                if (self.control_points[i * d + m] - expected).abs() > 1e-13 * size {
                    return None;
                }
            }
        }
        if scales.iter().any(|s| *s <= 0.0) {
            return None;
        }
        Some(scales)
    }

    /// Reads the plain-text control-point format written by [`Self::write`].
    pub fn read<R: BufRead>(reader: R, final_time: f64) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("{what}: {e}")))
        };
        let d = next_usize("dimension")?;
        if d == 0 || d > 3 {
            return Err(Error::Parse(format!("unsupported dimension {d}")));
        }
        let degrees = (0..d).map(|_| next_usize("degree")).collect::<Result<Vec<_>>>()?;
        let counts = (0..d).map(|_| next_usize("knot count")).collect::<Result<Vec<_>>>()?;
        let mut rest = it.map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("value '{t}': {e}"))));
        let mut spaces = Vec::with_capacity(d);
        for l in 0..d {
            let knots = (0..counts[l])
                .map(|_| rest.next().unwrap_or_else(|| Err(Error::Parse("missing knot".into()))))
                .collect::<Result<Vec<_>>>()?;
            spaces.push(SplineSpace1D::new(KnotVector::new(degrees[l], knots)?));
        }
        let n: usize = spaces.iter().map(|s| s.dimension()).product();
        let cps = (0..n * d)
            .map(|_| rest.next().unwrap_or_else(|| Err(Error::Parse("missing control point".into()))))
            .collect::<Result<Vec<_>>>()?;
        if rest.next().is_some() {
            return Err(Error::Parse("trailing data after control points".into()));
        }
        Self::new(spaces, cps, final_time)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim();
        writeln!(w, "# dimension, degrees, knot counts, knots, control points")?;
        writeln!(w, "{d}")?;
        let degs: Vec<String> = self.spaces.iter().map(|s| s.degree().to_string()).collect();
        writeln!(w, "{}", degs.join(" "))?;
        let counts: Vec<String> = self.spaces.iter().map(|s| s.knots().len().to_string()).collect();
        writeln!(w, "{}", counts.join(" "))?;
        for s in &self.spaces {
            let ks: Vec<String> = s.knots().iter().map(|k| format!("{k:.17e}")).collect();
            writeln!(w, "{}", ks.join(" "))?;
        }
        for cp in self.control_points.chunks(d) {
            let cs: Vec<String> = cp.iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(w, "{}", cs.join(" "))?;
        }
        Ok(())
    }
}

/// Least-squares fit of the clockwise ellipse `(a cos φ, -b sin φ)`,
/// `φ = 2πη`, with both end control points pinned to `(a, 0)`.
fn fit_closed_curve(space: &SplineSpace1D, a: f64, b: f64) -> Result<Vec<f64>> {
    let n = space.dimension();
    let m = space.num_elements() * ELLIPSE_SAMPLES_PER_SPAN;
    let interior = n - 2;
    let mut mat = DMatrix::<f64>::zeros(m, interior);
    let mut rhs = DMatrix::<f64>::zeros(m, 2);
    for s in 0..m {
        let eta = (s as f64 + 0.5) / m as f64;
        let phi = 2.0 * PI * eta;
        let target = [a * phi.cos(), -b * phi.sin()];
        let (first, ders) = space.eval_ders(eta, 0);
        let mut r = target;
        for (j, v) in ders[0].iter().enumerate() {
            let g = first + j;
            if g == 0 || g == n - 1 {
                r[0] -= v * a;
            } else {
                mat[(s, g - 1)] += v;
            }
        }
        rhs[(s, 0)] = r[0];
        rhs[(s, 1)] = r[1];
    }
    let normal = mat.transpose() * &mat;
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::Geometry("ellipse fit normal equations not definite".into()))?;
    let sol = chol.solve(&(mat.transpose() * rhs));
    let mut cps = vec![0.0; 2 * n];
    cps[0] = a;
    cps[2 * (n - 1)] = a;
    for i in 0..interior {
        cps[2 * (i + 1)] = sol[(i, 0)];
        cps[2 * (i + 1) + 1] = sol[(i, 1)];
    }
    Ok(cps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_square() {
        let g = GeometryMap::builtin(BuiltinGeometry::UnitSquare, 1.0).unwrap();
        let e = g.eval(&[0.3, 0.8], EvalLevel::Hessian).unwrap();
        assert!((e.point[0] - 0.3).abs() < 1e-15 && (e.point[1] - 0.8).abs() < 1e-15);
        assert!((e.jacobian.unwrap() - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(e.hessians.unwrap().iter().all(|h| h.norm() == 0.0));
        assert_eq!(g.affine_diagonal_scales(), Some(vec![1.0, 1.0]));
    }

    #[test]
    fn scaled_square() {
        let g = GeometryMap::affine_box(&[2.0, 2.0], 1.0).unwrap();
        let e = g.eval(&[0.5, 0.25], EvalLevel::Jacobian).unwrap();
        assert!((e.det().unwrap() - 4.0).abs() < 1e-14);
        assert!((e.jacobian.unwrap() - DMatrix::identity(2, 2) * 2.0).norm() < 1e-14);
    }

    #[test]
    fn unit_cube_jacobian() {
        let g = GeometryMap::builtin(BuiltinGeometry::UnitCube, 1.0).unwrap();
        for eta in [[0.0, 0.0, 0.0], [0.2, 0.7, 1.0], [1.0, 1.0, 0.5]] {
            let e = g.eval(&eta, EvalLevel::Jacobian).unwrap();
            assert!((e.jacobian.unwrap() - DMatrix::identity(3, 3)).norm() < 1e-15);
        }
    }

    #[test]
    fn ellipse_boundaries() {
        let g = GeometryMap::builtin(BuiltinGeometry::EllipseAnnulus, 300.0).unwrap();
        let (ao, bo, ai, bi) = ELLIPSE_AXES;
        let mut worst: f64 = 0.0;
        for k in 0..=2000 {
            let s = k as f64 / 2000.0;
            let inner = g.eval(&[s, 0.0], EvalLevel::Value).unwrap().point;
            let outer = g.eval(&[s, 1.0], EvalLevel::Value).unwrap().point;
            worst = worst.max((inner[0].powi(2) / ai / ai + inner[1].powi(2) / bi / bi - 1.0).abs());
            worst = worst.max((outer[0].powi(2) / ao / ao + outer[1].powi(2) / bo / bo - 1.0).abs());
        }
        assert!(worst < 1e-3, "worst algebraic residual {worst}");
        // parameter midpoint of the outer boundary is the far tip on the negative x-axis
        let mid = g.eval(&[0.5, 1.0], EvalLevel::Value).unwrap().point;
        assert!((mid[0] / ao + 1.0).abs() < 1e-3 && mid[1].abs() < 1e-3);
        let inner = g.eval(&[0.5, 0.0], EvalLevel::Value).unwrap().point;
        assert!((inner[0].powi(2) / ai / ai + inner[1].powi(2) / bi / bi - 1.0).abs() < 1e-3);
        assert!(g.affine_diagonal_scales().is_none());
    }

    #[test]
    fn singular_map_rejected() {
        let spaces = vec![SplineSpace1D::uniform(1, 1).unwrap(); 2];
        // all control points collapsed onto a line
        let cps = vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let g = GeometryMap::new(spaces, cps, 1.0).unwrap();
        assert!(matches!(
            g.eval(&[0.5, 0.5], EvalLevel::Jacobian),
            Err(Error::SingularGeometry { .. })
        ));
        assert!(g.eval(&[0.5, 0.5], EvalLevel::Value).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let g = GeometryMap::builtin(BuiltinGeometry::EllipseAnnulus, 1.0).unwrap();
        let mut buf = Vec::new();
        g.write(&mut buf).unwrap();
        let h = GeometryMap::read(&buf[..], 1.0).unwrap();
        assert_eq!(g.control_points(), h.control_points());
        assert_eq!(g.spaces(), h.spaces());
        assert!(GeometryMap::read(&b"2\n1 1\n4 4\n0 0 1 1\n0 0 1 1\n0 0 1 0\n"[..], 1.0).is_err());
    }

    #[test]
    fn unknown_name() {
        assert!("torus".parse::<BuiltinGeometry>().is_err());
    }
}
