//! Univariate and tensor-product B-spline spaces.
//!
//! Basis functions are indexed from zero. A univariate space of degree `p`
//! with `n` functions has `n + p + 1` knots, open at both ends. The
//! space-time tensor space drops the first time function so that every
//! member vanishes at `t = 0`; global indices are colexicographic with the
//! first spatial direction running fastest and time slowest.

use crate::error::{Error, Result};

/// Open, nondecreasing knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidKnots("degree must be at least 1".into()));
        }
        Self::validated(degree, knots)
    }

    /// Degree-zero vectors are only used internally for piecewise-constant
    /// stabilization parameters.
    pub(crate) fn validated(degree: usize, knots: Vec<f64>) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnots(format!(
                "need at least {} knots for degree {p}, got {}",
                2 * (p + 1),
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite() || *k < 0.0 || *k > 1.0) {
            return Err(Error::InvalidKnots("knots must lie in [0, 1]".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be nondecreasing".into()));
        }
        let len = knots.len();
        let open_start = knots[..=p].iter().all(|&k| k == 0.0) && knots[p + 1] > 0.0;
        let open_end = knots[len - p - 1..].iter().all(|&k| k == 1.0) && knots[len - p - 2] < 1.0;
        if !open_start || !open_end {
            return Err(Error::InvalidKnots(format!(
                "end knots must have multiplicity exactly {}",
                p + 1
            )));
        }
        let mut i = p + 1;
        while i < len - p - 1 {
            let mut j = i;
            while j + 1 < len - p - 1 && knots[j + 1] == knots[i] {
                j += 1;
            }
            let mult = j - i + 1;
            if mult > p.max(1) {
                return Err(Error::InvalidKnots(format!(
                    "interior knot {} has multiplicity {mult} > {p}",
                    knots[i]
                )));
            }
            i = j + 1;
        }
        Ok(Self { degree, knots })
    }

    /// Open uniform knot vector with `elements` equal spans.
    pub fn uniform(degree: usize, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::InvalidKnots("need at least one element".into()));
        }
        let breaks: Vec<f64> = (0..=elements).map(|e| e as f64 / elements as f64).collect();
        Self::open_on_breakpoints(degree, &breaks)
    }

    /// Maximal-smoothness open knot vector on the given breakpoints.
    pub fn open_on_breakpoints(degree: usize, breakpoints: &[f64]) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidKnots("need at least two breakpoints".into()));
        }
        let mut knots = vec![0.0; degree];
        knots.extend_from_slice(breakpoints);
        knots.extend(std::iter::repeat_n(1.0, degree));
        if degree == 0 {
            Self::validated(0, knots)
        } else {
            Self::new(degree, knots)
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions.
    pub fn dimension(&self) -> usize {
        self.knots.len() - self.degree - 1
    }
}

/// Basis values (or derivatives) of the `p + 1` functions active at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub first: usize,
    pub values: Vec<f64>,
}

/// Univariate spline space on an open knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace1D {
    knots: KnotVector,
    breakpoints: Vec<f64>,
    element_spans: Vec<usize>,
    mesh_size: f64,
}

impl SplineSpace1D {
    pub fn new(knots: KnotVector) -> Self {
        let k = &knots.knots;
        let mut breakpoints = vec![k[0]];
        let mut element_spans = Vec::new();
        for s in 0..k.len() - 1 {
            if k[s + 1] > k[s] {
                breakpoints.push(k[s + 1]);
                element_spans.push(s);
            }
        }
        let mesh_size = k.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Self {
            knots,
            breakpoints,
            element_spans,
            mesh_size,
        }
    }

    pub fn uniform(degree: usize, elements: usize) -> Result<Self> {
        Ok(Self::new(KnotVector::uniform(degree, elements)?))
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knots
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots.knots
    }

    pub fn dimension(&self) -> usize {
        self.knots.dimension()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn num_elements(&self) -> usize {
        self.element_spans.len()
    }

    /// Parametric interval of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    /// Index of the first basis function active on element `e`.
    pub fn element_first_basis(&self, e: usize) -> usize {
        self.element_spans[e] - self.degree()
    }

    /// Element containing `x`; knots belong to the element on their right,
    /// except `x = 1` which belongs to the last element.
    pub fn element_of(&self, x: f64) -> usize {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        idx.saturating_sub(1).min(self.num_elements() - 1)
    }

    /// Elements whose interior intersects the open interval `(a, b)`.
    pub fn elements_intersecting(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let first = self.breakpoints[1..].partition_point(|&r| r <= a);
        let end = self.breakpoints[..self.num_elements()].partition_point(|&l| l < b);
        first..end.max(first)
    }

    /// Knot span index `s` with `knots[s] <= x < knots[s + 1]`.
    pub fn find_span(&self, x: f64) -> usize {
        let k = self.knots();
        let p = self.degree();
        let n = self.dimension();
        let idx = k.partition_point(|&v| v <= x);
        idx.saturating_sub(1).clamp(p, n - 1)
    }

    /// Value or `order`-th derivative of the active basis functions at `x`.
    pub fn eval_basis(&self, x: f64, order: usize) -> Result<BasisValues> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { value: x });
        }
        if order > self.degree() {
            return Err(Error::Order {
                order,
                degree: self.degree(),
            });
        }
        let span = self.find_span(x);
        let mut ders = self.ders_at_span(span, x, order);
        Ok(BasisValues {
            first: span - self.degree(),
            values: ders.swap_remove(order),
        })
    }

    /// All derivatives up to `nders` of the active functions at `x`;
    /// returns the first active index and `ders[k][j]`.
    pub fn eval_ders(&self, x: f64, nders: usize) -> (usize, Vec<Vec<f64>>) {
        let span = self.find_span(x);
        (span - self.degree(), self.ders_at_span(span, x, nders))
    }

    /// Derivatives restricted to the polynomial piece of a fixed span; used
    /// by quadrature so that points on element boundaries stay on their
    /// own element.
    pub fn ders_at_span(&self, span: usize, x: f64, nders: usize) -> Vec<Vec<f64>> {
        let p = self.degree();
        let k = self.knots();
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - k[span + 1 - j];
            right[j] = k[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; nders + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for kk in 1..=nders.min(p) {
                let mut d = 0.0;
                let rk = r as isize - kk as isize;
                let pk = p - kk;
                if r >= kk {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { kk - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][kk] = -a[s1][kk - 1] / ndu[pk + 1][r];
                    d += a[s2][kk] * ndu[r][pk];
                }
                ders[kk][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (kk, row) in ders.iter_mut().enumerate().skip(1) {
            if kk > p {
                row.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            row.iter_mut().for_each(|v| *v *= factor);
            factor *= (p - kk) as f64;
        }
        ders
    }

    /// Greville abscissae, one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree();
        let k = self.knots();
        if p == 0 {
            return (0..self.dimension()).map(|i| 0.5 * (k[i] + k[i + 1])).collect();
        }
        (0..self.dimension())
            .map(|i| k[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }
}

/// Per-direction windows of a support extension; spatial directions first,
/// time last.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportExtensionBox {
    pub intervals: Vec<(f64, f64)>,
    pub knot_windows: Vec<(usize, usize)>,
}

/// Tensor space `S_s ⊗ X_t` on `(0,1)^d × (0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpaceTime {
    spatial: Vec<SplineSpace1D>,
    time: SplineSpace1D,
}

impl TensorSpaceTime {
    pub fn new(spatial: Vec<SplineSpace1D>, time: SplineSpace1D) -> Result<Self> {
        if spatial.is_empty() || spatial.len() > 3 {
            return Err(Error::InvalidParameter(format!(
                "spatial dimension must be 1, 2 or 3, got {}",
                spatial.len()
            )));
        }
        let ps = spatial[0].degree();
        if spatial.iter().any(|s| s.degree() != ps) {
            return Err(Error::InvalidParameter(
                "all spatial directions must share one degree".into(),
            ));
        }
        let t = time.knots();
        let pt = time.degree();
        if t[pt + 1..t.len() - pt - 1].windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidKnots(
                "time knot vector must have maximal interior smoothness".into(),
            ));
        }
        if time.dimension() < 2 {
            return Err(Error::InvalidParameter(
                "time space needs at least two functions".into(),
            ));
        }
        Ok(Self { spatial, time })
    }

    /// Uniform meshes: `spatial_elements[l]` spans in direction `l`.
    pub fn uniform(
        space_degree: usize,
        spatial_elements: &[usize],
        time_degree: usize,
        time_elements: usize,
    ) -> Result<Self> {
        let spatial = spatial_elements
            .iter()
            .map(|&m| SplineSpace1D::uniform(space_degree, m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spatial, SplineSpace1D::uniform(time_degree, time_elements)?)
    }

    pub fn dim(&self) -> usize {
        self.spatial.len()
    }

    pub fn spatial(&self) -> &[SplineSpace1D] {
        &self.spatial
    }

    pub fn time(&self) -> &SplineSpace1D {
        &self.time
    }

    pub fn spatial_dims(&self) -> Vec<usize> {
        self.spatial.iter().map(|s| s.dimension()).collect()
    }

    /// `N_s`.
    pub fn n_space(&self) -> usize {
        self.spatial.iter().map(|s| s.dimension()).product()
    }

    /// `N_t`: time functions vanishing at zero.
    pub fn n_time(&self) -> usize {
        self.time.dimension() - 1
    }

    pub fn n_dof(&self) -> usize {
        self.n_space() * self.n_time()
    }

    /// Colexicographic spatial index.
    pub fn space_index(&self, i_s: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (i, s) in i_s.iter().zip(&self.spatial) {
            idx += i * stride;
            stride *= s.dimension();
        }
        idx
    }

    pub fn space_multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.spatial
            .iter()
            .map(|s| {
                let i = idx % s.dimension();
                idx /= s.dimension();
                i
            })
            .collect()
    }

    /// Global index of spatial multi-index `i_s` and constrained time index
    /// `j` (unconstrained time function `j + 1`).
    pub fn global_index(&self, i_s: &[usize], j: usize) -> usize {
        self.space_index(i_s) + self.n_space() * j
    }

    /// Support extension of the function with spatial multi-index `i_s` and
    /// *unconstrained* time index `i_t`: per direction the open interval
    /// `(ξ[i - p], ξ[i + p + 1])`, clamped to `[0, 1]`.
    pub fn support_extension(&self, i_s: &[usize], i_t: usize) -> Result<SupportExtensionBox> {
        if i_s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: i_s.len(),
            });
        }
        let mut intervals = Vec::with_capacity(self.dim() + 1);
        let mut knot_windows = Vec::with_capacity(self.dim() + 1);
        let dirs = self.spatial.iter().zip(i_s.iter().copied()).chain(std::iter::once((&self.time, i_t)));
        for (space, i) in dirs {
            if i >= space.dimension() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    size: space.dimension(),
                });
            }
            let p = space.degree();
            let k = space.knots();
            let lo = i.saturating_sub(p);
            let hi = (i + p + 1).min(k.len() - 1);
            knot_windows.push((lo, hi));
            intervals.push((k[lo].max(0.0), k[hi].min(1.0)));
        }
        Ok(SupportExtensionBox {
            intervals,
            knot_windows,
        })
    }
}
