use nalgebra::DMatrix;

use super::cells::Cells1D;
use crate::spline::SplineSpace1D;

/// Mass, stiffness and advection matrices of a univariate space.
/// `advection[(i, j)] = ∫ b_j' b_i`.
#[derive(Debug, Clone)]
pub struct UnivariateMatrices {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub advection: DMatrix<f64>,
}

/// Entries `∫ w b_j^(r) b_i^(s)` with `q = p + 1` Gauss points per element.
pub fn univariate_matrices(space: &SplineSpace1D, weight: Option<&dyn Fn(f64) -> f64>) -> UnivariateMatrices {
    let n = space.dimension();
    let cells = Cells1D::new(space, space.degree() + 1, 1, &[]);
    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    let mut advection = DMatrix::zeros(n, n);
    for (c, cell) in cells.cells.iter().enumerate() {
        for (qp, (&x, &w)) in cell.points.iter().zip(&cell.weights).enumerate() {
            let w = w * weight.map_or(1.0, |f| f(x));
            let v = cells.ders_at(c, qp, 0);
            let d = cells.ders_at(c, qp, 1);
            for a in 0..cells.nloc {
                let i = cell.first + a;
                for b in 0..cells.nloc {
                    let j = cell.first + b;
                    mass[(i, j)] += w * v[a] * v[b];
                    stiffness[(i, j)] += w * d[a] * d[b];
                    advection[(i, j)] += w * d[b] * v[a];
                }
            }
        }
    }
    UnivariateMatrices {
        mass,
        stiffness,
        advection,
    }
}

/// `∫ w b_i^(k) b_j^(k)` integrated on elements split at `breaks`.
pub fn weighted_derivative_matrix(
    space: &SplineSpace1D,
    k: usize,
    weight: &dyn Fn(f64) -> f64,
    q: usize,
    breaks: &[f64],
) -> DMatrix<f64> {
    let n = space.dimension();
    let cells = Cells1D::new(space, q, k, breaks);
    let mut m = DMatrix::zeros(n, n);
    for (c, cell) in cells.cells.iter().enumerate() {
        for (qp, (&x, &w)) in cell.points.iter().zip(&cell.weights).enumerate() {
            let w = w * weight(x);
            if w == 0.0 {
                continue;
            }
            let d = cells.ders_at(c, qp, k);
            for a in 0..cells.nloc {
                for b in 0..cells.nloc {
                    m[(cell.first + a, cell.first + b)] += w * d[a] * d[b];
                }
            }
        }
    }
    m
}

/// Drops the first row and column (the function not vanishing at zero).
pub fn constrain(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.view((1, 1), (m.nrows() - 1, m.ncols() - 1)).into_owned()
}

/// `W_t` and `M_t` on the constrained time space of `(0, T)`.
#[derive(Debug, Clone)]
pub struct TimeMatrices {
    pub advection: DMatrix<f64>,
    pub mass: DMatrix<f64>,
}

pub fn time_matrices(time: &SplineSpace1D, final_time: f64) -> TimeMatrices {
    let u = univariate_matrices(time, None);
    TimeMatrices {
        advection: constrain(&u.advection),
        mass: constrain(&u.mass) * final_time,
    }
}
