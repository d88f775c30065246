//! Dense row-major f64 matrix with the handful of products the network
//! engine needs. Shape violations are programmer error and panic; the
//! operation layer above validates caller input and returns `Result`.

use rayon::prelude::*;

/// Below this many multiply-adds a product stays single-threaded; the rayon
/// dispatch overhead would dominate.
const PAR_FLOP_THRESHOLD: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Stacks the given rows of `src` into a new matrix (mini-batch gather).
    pub fn gather_rows(src: &Matrix, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * src.cols);
        for &i in indices {
            data.extend_from_slice(src.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: src.cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// C = A · Bᵀ. Both operands are walked row-wise, so this is the
    /// cache-friendly kernel for `batch × weightsᵀ`.
    pub fn matmul_nt(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.cols, b.cols, "inner dimensions must agree (A·Bᵀ)");
        let (m, n, k) = (self.rows, b.rows, self.cols);
        let mut out = Matrix::zeros(m, n);
        let work = m * n * k;
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = self.row(i);
            for (j, out) in out_row.iter_mut().enumerate() {
                let b_row = b.row(j);
                let mut acc = 0.0;
                for t in 0..k {
                    acc += a_row[t] * b_row[t];
                }
                *out = acc;
            }
        };
        if work >= PAR_FLOP_THRESHOLD {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        out
    }

    /// C = A · B.
    pub fn matmul_nn(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.cols, b.rows, "inner dimensions must agree (A·B)");
        let (m, n, k) = (self.rows, b.cols, self.cols);
        let mut out = Matrix::zeros(m, n);
        let work = m * n * k;
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = self.row(i);
            for (t, &a) in a_row.iter().enumerate().take(k) {
                if a == 0.0 {
                    continue;
                }
                let b_row = b.row(t);
                for (out, &bv) in out_row.iter_mut().zip(b_row) {
                    *out += a * bv;
                }
            }
        };
        if work >= PAR_FLOP_THRESHOLD {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        out
    }

    /// C = Aᵀ · B, used for weight gradients (`gradᵀ · input`).
    pub fn matmul_tn(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.rows, b.rows, "outer dimensions must agree (Aᵀ·B)");
        let (m, n, k) = (self.cols, b.cols, self.rows);
        let mut out = Matrix::zeros(m, n);
        let work = m * n * k;
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for t in 0..k {
                let a = self.get(t, i);
                if a == 0.0 {
                    continue;
                }
                let b_row = b.row(t);
                for j in 0..n {
                    out_row[j] += a * b_row[j];
                }
            }
        };
        if work >= PAR_FLOP_THRESHOLD {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        out
    }

    /// Adds `v` to every row in place (bias broadcast).
    pub fn add_row_vector(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.cols, "vector length must match columns");
        for r in 0..self.rows {
            let row = self.row_mut(r);
            for (x, &b) in row.iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
