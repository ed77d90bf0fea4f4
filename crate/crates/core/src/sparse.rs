//! Minimal compressed-sparse-row matrix used for assembly and matvecs.

use rayon::prelude::*;

const PAR_ROWS: usize = 4096;

/// Coordinate-format accumulator. Duplicates are summed on conversion.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    /// Adds `scale * m` with its (0,0) entry placed at (row_off, col_off).
    pub fn add_block(&mut self, row_off: usize, col_off: usize, m: &CsrMatrix, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for r in 0..m.nrows {
            for (c, v) in m.row(r) {
                self.push(row_off + r, col_off + c, scale * v);
            }
        }
    }

    pub fn add_diagonal(&mut self, off: usize, n: usize, v: f64) {
        for k in 0..n {
            self.push(off + k, off + k, v);
        }
    }

    pub fn into_csr(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        // drop entries that cancelled exactly
        let mut k = 0;
        let mut out_idx = Vec::with_capacity(indices.len());
        let mut out_val = Vec::with_capacity(values.len());
        for r in 0..self.nrows {
            while k < rows.len() && rows[k] == r {
                if values[k] != 0.0 {
                    out_idx.push(indices[k]);
                    out_val.push(values[k]);
                }
                k += 1;
            }
            indptr[r + 1] = out_idx.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices: out_idx,
            values: out_val,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Triplets::new(nrows, ncols).into_csr()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::new(n, n);
        t.add_diagonal(0, n, 1.0);
        t.into_csr()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.indptr[r]..self.indptr[r + 1] {
            s += self.values[k] * x[self.indices[k]];
        }
        s
    }

    /// y = A x. Rows are independent, so the parallel path is bit-identical to the serial one.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(r, yr)| *yr = self.row_dot(r, x));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_dot(r, x);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_into(x, &mut y);
        y
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        if self.nrows >= PAR_ROWS {
            // fixed-size chunks keep the summation order independent of the thread count
            x.par_chunks(PAR_ROWS)
                .enumerate()
                .map(|(ci, xs)| {
                    let mut s = 0.0;
                    for (k, xv) in xs.iter().enumerate() {
                        s += xv * self.row_dot(ci * PAR_ROWS + k, y);
                    }
                    s
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum()
        } else {
            x.iter()
                .enumerate()
                .map(|(r, xv)| xv * self.row_dot(r, y))
                .sum()
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push(c, r, v);
            }
        }
        t.into_csr()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// self + s·other.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = Triplets::new(self.nrows, self.ncols);
        t.add_block(0, 0, self, 1.0);
        t.add_block(0, 0, other, s);
        t.into_csr()
    }

    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Triplets::new(self.nrows, other.ncols);
        let mut acc = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &c in &touched {
                t.push(r, c, acc[c]);
                acc[c] = 0.0;
            }
            touched.clear();
        }
        t.into_csr()
    }

    /// Largest |a_ij − b_ij| over the union of both patterns.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        let d = self.add_scaled(other, -1.0);
        d.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_cancellations_vanish() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, 2.0);
        t.push(0, 1, -2.0);
        t.push(1, 0, 1.5);
        t.push(1, 0, 1.5);
        let m = t.into_csr();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let mut a = Triplets::new(2, 3);
        a.push(0, 0, 1.0);
        a.push(0, 2, 2.0);
        a.push(1, 1, 3.0);
        let a = a.into_csr();
        let b = a.transpose();
        let ab = a.matmul(&b);
        assert_eq!(ab.to_dense(), vec![vec![5.0, 0.0], vec![0.0, 9.0]]);
    }

    #[test]
    fn bilinear_is_chunk_order_independent() {
        let n = 3 * PAR_ROWS + 7;
        let mut t = Triplets::new(n, n);
        for k in 0..n {
            t.push(k, k, 1.0 + (k % 5) as f64);
            if k + 1 < n {
                t.push(k, k + 1, 0.25);
            }
        }
        let m = t.into_csr();
        let x: Vec<f64> = (0..n).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let a = m.quad_form(&x);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| m.quad_form(&x));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
