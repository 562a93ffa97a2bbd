//! Per-direction quadrature cells with precomputed basis derivatives.

use crate::quadrature::GaussLegendre;
use crate::spline::SplineSpace1D;

/// One quadrature cell: a sub-interval of a single element.
#[derive(Debug, Clone)]
pub struct Cell1D {
    pub a: f64,
    pub b: f64,
    pub element: usize,
    /// First active basis function (unconstrained index).
    pub first: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// `ders[(q * (nders + 1) + k) * nloc + j]`.
    ders: Vec<f64>,
}

/// Gauss rule on every cell of a univariate space; cells are the elements
/// split at any `extra` breaks.
#[derive(Debug, Clone)]
pub struct Cells1D {
    pub nq: usize,
    pub nloc: usize,
    pub nders: usize,
    pub cells: Vec<Cell1D>,
}

impl Cells1D {
    pub fn new(space: &SplineSpace1D, q: usize, nders: usize, extra: &[f64]) -> Self {
        let rule = GaussLegendre::new(q);
        let p = space.degree();
        let nloc = p + 1;
        let mut cells = Vec::new();
        for e in 0..space.num_elements() {
            let (lo, hi) = space.element(e);
            let mut cuts: Vec<f64> = extra.iter().copied().filter(|&x| x > lo && x < hi).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
            let mut bounds = vec![lo];
            bounds.extend(cuts.into_iter().filter(|&x| x - lo > 1e-14 && hi - x > 1e-14));
            bounds.push(hi);
            let first = space.element_first_basis(e);
            let span = first + p;
            for w in bounds.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (points, weights): (Vec<f64>, Vec<f64>) = rule.on_interval(a, b).unzip();
                let mut ders = Vec::with_capacity(q * (nders + 1) * nloc);
                for &x in &points {
                    let d = space.ders_at_span(span, x, nders);
                    for row in &d {
                        ders.extend_from_slice(row);
                    }
                }
                cells.push(Cell1D {
                    a,
                    b,
                    element: e,
                    first,
                    points,
                    weights,
                    ders,
                });
            }
        }
        Self {
            nq: q,
            nloc,
            nders,
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `k`-th derivative of local function `j` at point `qp` of cell `c`.
    #[inline]
    pub fn der(&self, c: usize, qp: usize, k: usize, j: usize) -> f64 {
        self.cells[c].ders[(qp * (self.nders + 1) + k) * self.nloc + j]
    }

    /// The `nloc` values of derivative `k` at point `qp` of cell `c`.
    #[inline]
    pub fn ders_at(&self, c: usize, qp: usize, k: usize) -> &[f64] {
        let off = (qp * (self.nders + 1) + k) * self.nloc;
        &self.cells[c].ders[off..off + self.nloc]
    }
}
