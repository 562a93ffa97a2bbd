//! Compressed sparse row storage with fixed patterns.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given (per-row, any order) column pattern.
    pub fn from_pattern(nrows: usize, ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < ncols));
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_pattern(nrows, ncols, rows);
        for &(r, c, v) in triplets {
            let k = m.find(r, c).expect("pattern built from triplets");
            m.values[k] += v;
        }
        m
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let rows = (0..a.nrows())
            .map(|i| (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(a.nrows(), a.ncols(), rows);
        for i in 0..a.nrows() {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = a[(i, m.col_idx[k])];
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[(i, self.col_idx[k])] += self.values[k];
            }
        }
        a
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Storage position of `(row, col)` if it is in the pattern.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let r = self.row_range(row);
        self.col_idx[r.clone()].binary_search(&col).ok().map(|k| r.start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.find(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// `self += alpha · other`; `other`'s pattern must be contained in ours.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                actual: other.nrows,
            });
        }
        if self.same_pattern(other) {
            for (a, b) in self.values.iter_mut().zip(&other.values) {
                *a += alpha * b;
            }
            return Ok(());
        }
        for i in 0..other.nrows {
            for k in other.row_range(i) {
                let pos = self.find(i, other.col_idx[k]).ok_or_else(|| {
                    Error::InvalidParameter(format!("entry ({i}, {}) outside pattern", other.col_idx[k]))
                })?;
                self.values[pos] += alpha * other.values[k];
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_range(i);
            *yi = self.col_idx[r.clone()]
                .iter()
                .zip(&self.values[r])
                .map(|(&c, v)| v * x[c])
                .sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                rows[self.col_idx[k]].push(i);
            }
        }
        let mut t = Self::from_pattern(self.ncols, self.nrows, rows);
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                let pos = t.find(self.col_idx[k], i).expect("transposed pattern");
                t.values[pos] = self.values[k];
            }
        }
        t
    }

    /// Coordinate (Matrix Market) text dump, 1-based indices.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, self.col_idx[k] + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}

/// Pattern of `T ⊗ S` with global index `s + n_s · t`.
#[derive(Debug, Clone)]
pub struct KronLayout {
    time: CsrMatrix,
    space: CsrMatrix,
}

impl KronLayout {
    pub fn new(time: CsrMatrix, space: CsrMatrix) -> Self {
        Self { time, space }
    }

    pub fn time_pattern(&self) -> &CsrMatrix {
        &self.time
    }

    pub fn space_pattern(&self) -> &CsrMatrix {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.time.nrows() * self.space.nrows()
    }

    pub fn empty(&self) -> CsrMatrix {
        let ns = self.space.nrows();
        let nt = self.time.nrows();
        let mut row_ptr = Vec::with_capacity(ns * nt + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for it in 0..nt {
            let (tcols, _) = self.time.row(it);
            for is in 0..ns {
                let (scols, _) = self.space.row(is);
                for &jt in tcols {
                    col_idx.extend(scols.iter().map(|&js| js + ns * jt));
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            nrows: ns * nt,
            ncols: ns * nt,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Position of `((is, it), (js, jt))` inside a matrix built by [`Self::empty`].
    #[inline]
    pub fn position(&self, target: &CsrMatrix, is: usize, it: usize, js: usize, jt: usize) -> Option<usize> {
        let ns = self.space.nrows();
        let row = is + ns * it;
        let (tcols, _) = self.time.row(it);
        let kt = tcols.binary_search(&jt).ok()?;
        let (scols, _) = self.space.row(is);
        let ks = scols.binary_search(&js).ok()?;
        Some(target.row_ptr[row] + kt * scols.len() + ks)
    }

    /// `target += coef · (time ⊗ space)`.
    pub fn add_kron(&self, target: &mut CsrMatrix, coef: f64, time: &DMatrix<f64>, space: &CsrMatrix) -> Result<()> {
        let ns = self.space.nrows();
        let nt = self.time.nrows();
        if time.nrows() != nt || space.nrows() != ns {
            return Err(Error::DimensionMismatch {
                expected: nt * ns,
                actual: time.nrows() * space.nrows(),
            });
        }
        let aligned = space.same_pattern(&self.space);
        for it in 0..nt {
            let (tcols, _) = self.time.row(it);
            for (kt, &jt) in tcols.iter().enumerate() {
                let tv = coef * time[(it, jt)];
                if tv == 0.0 {
                    continue;
                }
                for is in 0..ns {
                    let row = is + ns * it;
                    let len = self.space.row_range(is).len();
                    let base = target.row_ptr[row] + kt * len;
                    let (scols, svals) = space.row(is);
                    if aligned {
                        for (ks, v) in svals.iter().enumerate() {
                            target.values[base + ks] += tv * v;
                        }
                    } else {
                        let (pcols, _) = self.space.row(is);
                        for (js, v) in scols.iter().zip(svals) {
                            let ks = pcols.binary_search(js).map_err(|_| {
                                Error::InvalidParameter("space factor outside layout pattern".into())
                            })?;
                            target.values[base + ks] += tv * v;
                        }
                    }
                }
            }
            // entries of `time` outside its pattern must vanish
            for jt in 0..nt {
                if time[(it, jt)] != 0.0 && tcols.binary_search(&jt).is_err() {
                    return Err(Error::InvalidParameter("time factor outside layout pattern".into()));
                }
            }
        }
        Ok(())
    }
}

/// Banded pattern `|i - j| <= half_bandwidth`.
pub fn band_pattern(n: usize, half_bandwidth: usize) -> CsrMatrix {
    let rows = (0..n)
        .map(|i| (i.saturating_sub(half_bandwidth)..(i + half_bandwidth + 1).min(n)).collect())
        .collect();
    CsrMatrix::from_pattern(n, n, rows)
}

/// Tensor product of banded patterns, colexicographic ordering.
pub fn tensor_band_pattern(dims: &[usize], half_bandwidths: &[usize]) -> CsrMatrix {
    let n: usize = dims.iter().product();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut multi = [0usize; 3];
        let mut rem = i;
        for (l, d) in dims.iter().enumerate() {
            multi[l] = rem % d;
            rem /= d;
        }
        let ranges: Vec<(usize, usize)> = dims
            .iter()
            .enumerate()
            .map(|(l, &d)| (multi[l].saturating_sub(half_bandwidths[l]), (multi[l] + half_bandwidths[l] + 1).min(d)))
            .collect();
        let mut cols = vec![0usize];
        let mut stride = 1;
        for (l, &(lo, hi)) in ranges.iter().enumerate() {
            let mut next = Vec::with_capacity(cols.len() * (hi - lo));
            for j in lo..hi {
                next.extend(cols.iter().map(|c| c + j * stride));
            }
            cols = next;
            stride *= dims[l];
        }
        rows.push(cols);
    }
    CsrMatrix::from_pattern(n, n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 2, -1.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 2), -1.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }

    #[test]
    fn kron_layout_matches_dense() {
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 3.0, 0.5, 0.0, 4.0, 1.0]);
        let s = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.25, 5.0]);
        let layout = KronLayout::new(band_pattern(3, 1), band_pattern(2, 1));
        let mut m = layout.empty();
        layout.add_kron(&mut m, 2.0, &t, &CsrMatrix::from_dense(&s)).unwrap();
        let dense = t.kronecker(&s) * 2.0;
        assert!((m.to_dense() - dense).norm() < 1e-15);
        let pos = layout.position(&m, 1, 2, 0, 1).unwrap();
        assert_eq!(m.values()[pos], 2.0 * 4.0 * 0.25);
    }

    #[test]
    fn tensor_band() {
        let p = tensor_band_pattern(&[3, 4], &[1, 1]);
        assert_eq!(p.nrows(), 12);
        let (cols, _) = p.row(0);
        assert_eq!(cols, &[0, 1, 3, 4]);
        let (cols, _) = p.row(4);
        assert_eq!(cols.len(), 9);
    }
}
