use rayon::prelude::*;

use crate::error::{MspError, Result};
use crate::linalg::vector::dot;

/// Work threshold (rows * cols) above which dense kernels split rows across threads.
/// Each output entry is still reduced serially, so results do not depend on the
/// thread count.
const PAR_WORK: usize = 1 << 16;

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MspError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(MspError::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        for (i, x) in v.iter().enumerate() {
            self.set(i, j, *x);
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn add_diag(&mut self, shift: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.add_to(i, i, shift);
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MspError::DimensionMismatch("matrix add".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Replaces the matrix by `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    /// `y = M x`, assuming conformal lengths.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let c = self.cols;
        if self.rows * c >= PAR_WORK {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = dot(&self.data[i * c..(i + 1) * c], x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = dot(&self.data[i * c..(i + 1) * c], x);
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = M^T x`.
    pub fn matvec_t_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (yj, rj) in y.iter_mut().zip(row) {
                *yj += xi * rj;
            }
        }
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        self.matvec_t_into(x, &mut y);
        y
    }

    /// Classical `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(MspError::DimensionMismatch(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return Ok(out);
        }
        // Row-major data read as column-major is the transpose, so Cᵀ = Bᵀ Aᵀ
        // lands directly in row-major order.
        let bt = nalgebra::DMatrixView::from_slice(&other.data, n, k);
        let rows_per = if m * k * n >= PAR_WORK * 4 { 64 } else { m };
        out.data
            .par_chunks_mut(rows_per * n)
            .zip(self.data.par_chunks(rows_per * k))
            .for_each(|(oc, ac)| {
                let r = ac.len() / k;
                let at = nalgebra::DMatrixView::from_slice(ac, k, r);
                let mut ct = nalgebra::DMatrixViewMut::from_slice(oc, n, r);
                ct.gemm(1.0, &bt, &at, 0.0);
            });
        Ok(out)
    }

    /// `self^T * self`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        if self.rows == 0 || n == 0 {
            return Self::zeros(n, n);
        }
        let block = 512;
        let partial = |chunk: &[f64]| {
            let vt = nalgebra::DMatrixView::from_slice(chunk, n, chunk.len() / n);
            let mut g = nalgebra::DMatrix::<f64>::zeros(n, n);
            g.gemm(1.0, &vt, &vt.transpose(), 0.0);
            g
        };
        let g = if self.rows * n * n >= PAR_WORK * 4 {
            self.data
                .par_chunks(block * n)
                .map(partial)
                .reduce(|| nalgebra::DMatrix::zeros(n, n), |a, b| a + b)
        } else {
            partial(&self.data)
        };
        let mut out = Self { rows: n, cols: n, data: g.as_slice().to_vec() };
        out.symmetrize();
        out
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}
