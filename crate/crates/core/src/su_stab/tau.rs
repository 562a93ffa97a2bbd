//! Upwind parameters `τ_k`, `k = 1..p_t`.

use nalgebra::{DMatrix, DVector};

use crate::assembly::Cells1D;
use crate::error::{Error, Result};
use crate::spline::{KnotVector, SplineSpace1D};

/// Relative constraint residual above which construction fails.
pub const TAU_FAILURE_RESIDUAL: f64 = 1e-8;

/// `τ_k` stored in parametric form `σ_k(s) = T^{1-2k} τ_k(T s)`, so that
/// `∫_0^T τ_k ∂_t^k b_i ∂_t^k b_j dt = ∫_0^1 σ_k b̂_i^(k) b̂_j^(k) ds`.
/// `σ_k` lives in the maximally smooth spline space of degree `p_t - k` on
/// the time breakpoints.
#[derive(Debug, Clone)]
pub struct TauFunctions {
    spaces: Vec<SplineSpace1D>,
    coefficients: Vec<Vec<f64>>,
    residual: f64,
}

impl TauFunctions {
    pub fn degree(&self) -> usize {
        self.spaces.len()
    }

    /// Space of `σ_k` (`k` is 1-based).
    pub fn space(&self, k: usize) -> &SplineSpace1D {
        &self.spaces[k - 1]
    }

    pub fn coefficients(&self, k: usize) -> &[f64] {
        &self.coefficients[k - 1]
    }

    /// Relative max-norm residual of the defining conditions.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `σ_k(s)` for parametric time `s`.
    pub fn eval_parametric(&self, k: usize, s: f64) -> f64 {
        let space = &self.spaces[k - 1];
        let (first, ders) = space.eval_ders(s.clamp(0.0, 1.0), 0);
        ders[0]
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.coefficients[k - 1][first + j])
            .sum()
    }

    /// Physical `τ_k(t)` on `(0, T)`.
    pub fn eval(&self, k: usize, t: f64, final_time: f64) -> f64 {
        final_time.powi(2 * k as i32 - 1) * self.eval_parametric(k, t / final_time)
    }

    /// Smallest coefficient of any `σ_k` (sign diagnostic).
    pub fn min_coefficient(&self) -> f64 {
        self.coefficients.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Solves `∫ b'_{i+ℓ} b_i + Σ_k ∫ σ_k b^(k)_{i+ℓ} b^(k)_i = 0` over the
/// pairs `1 <= i < n - 1`, `1 <= ℓ <= min(p, n - 1 - i)`, i.e. over the
/// basis without the initial function `b_0`. The system is underdetermined
/// near `t = 0`; the minimum-norm solution (in `h`-scaled coefficients) is
/// taken.
pub fn compute_tau(time: &SplineSpace1D) -> Result<TauFunctions> {
    let p = time.degree();
    let n = time.dimension();
    if p < 1 || n < 3 {
        return Err(Error::InvalidParameter(format!(
            "stabilization parameters need degree >= 1 and at least two constrained functions (degree {p}, dimension {n})"
        )));
    }
    let spaces: Vec<SplineSpace1D> = (1..=p)
        .map(|k| {
            let kv = KnotVector::open_on_breakpoints(p - k, time.breakpoints())?;
            Ok(SplineSpace1D::new(kv))
        })
        .collect::<Result<_>>()?;
    let offsets: Vec<usize> = spaces
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.dimension();
            Some(o)
        })
        .collect();
    let ncols: usize = spaces.iter().map(|s| s.dimension()).sum();

    // row index of (i, ℓ)
    let mut row_of = vec![vec![usize::MAX; p + 1]; n];
    let mut nrows = 0;
    for (i, row) in row_of.iter_mut().enumerate().take(n - 1).skip(1) {
        for slot in row.iter_mut().take(p.min(n - 1 - i) + 1).skip(1) {
            *slot = nrows;
            nrows += 1;
        }
    }

    let q = p + 2;
    let cells = Cells1D::new(time, q, p, &[]);
    let tau_cells: Vec<Cells1D> = spaces.iter().map(|s| Cells1D::new(s, q, 0, &[])).collect();
    let mut a = DMatrix::zeros(nrows, ncols);
    let mut rhs = DVector::zeros(nrows);
    for (c, cell) in cells.cells.iter().enumerate() {
        for qp in 0..q {
            let w = cell.weights[qp];
            for ia in 0..=p {
                let i = cell.first + ia;
                for l in 1..=p {
                    let ja = ia + l;
                    if ja > p || row_of[i][l] == usize::MAX {
                        continue;
                    }
                    let r = row_of[i][l];
                    rhs[r] -= w * cells.der(c, qp, 1, ja) * cells.der(c, qp, 0, ia);
                    for k in 1..=p {
                        let prod = w * cells.der(c, qp, k, ja) * cells.der(c, qp, k, ia);
                        let tc = &tau_cells[k - 1];
                        let tcell = &tc.cells[c];
                        for (jj, v) in tc.ders_at(c, qp, 0).iter().enumerate() {
                            a[(r, offsets[k - 1] + tcell.first + jj)] += prod * v;
                        }
                    }
                }
            }
        }
    }

    // column scaling h^(2k-1) brings every block to unit size
    let h = time.mesh_size();
    let scale: Vec<f64> = (1..=p)
        .flat_map(|k| std::iter::repeat_n(h.powi(2 * k as i32 - 1), spaces[k - 1].dimension()))
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let solve = |b: &DVector<f64>| svd.solve(b, 1e-13 * smax).map_err(|e| Error::SingularMatrix(e.to_string()));
    let mut y = solve(&rhs)?;
    // iterative refinement recovers the accuracy lost to the truncation
    for _ in 0..2 {
        y += solve(&(&rhs - &scaled * &y))?;
    }
    let x = DVector::from_iterator(ncols, y.iter().zip(&scale).map(|(v, s): (&f64, &f64)| v * s));

    let res = &a * &x - &rhs;
    let rhs_scale = rhs.amax().max(f64::MIN_POSITIVE);
    let residual = res.amax() / rhs_scale;
    if !(residual <= TAU_FAILURE_RESIDUAL) {
        return Err(Error::StabilizationConstruction { residual });
    }
    let coefficients = (0..p)
        .map(|k| x.as_slice()[offsets[k]..offsets[k] + spaces[k].dimension()].to_vec())
        .collect();
    Ok(TauFunctions {
        spaces,
        coefficients,
        residual,
    })
}
