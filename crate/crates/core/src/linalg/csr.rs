use rayon::prelude::*;

use crate::error::{MspError, Result};
use crate::linalg::dense::DenseMatrix;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Validates the raw CSR arrays.
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(MspError::DimensionMismatch(
                "row pointer array must have rows+1 entries starting at 0".into(),
            ));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(MspError::Domain("row pointers must be nondecreasing".into()));
        }
        let nnz = row_ptr[rows];
        if col_idx.len() != nnz || values.len() != nnz {
            return Err(MspError::DimensionMismatch(format!(
                "nnz {nnz} disagrees with index/value arrays ({}, {})",
                col_idx.len(),
                values.len()
            )));
        }
        if let Some(&c) = col_idx.iter().find(|&&c| c >= cols) {
            return Err(MspError::Domain(format!("column index {c} out of range [0, {cols})")));
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a CSR matrix from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(i, j, _) in triplets {
            if i >= rows || j >= cols {
                return Err(MspError::Domain(format!(
                    "triplet ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols_buf = vec![0usize; triplets.len()];
        let mut vals_buf = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[i];
            cols_buf[p] = j;
            vals_buf[p] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..rows {
            let mut entries: Vec<(usize, f64)> = (counts[i]..counts[i + 1])
                .map(|p| (cols_buf[p], vals_buf[p]))
                .collect();
            entries.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < entries.len() {
                let (c, mut v) = entries[k];
                k += 1;
                while k < entries.len() && entries[k].0 == c {
                    v += entries[k].1;
                    k += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut trip = Vec::new();
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                let v = d.get(i, j);
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(d.rows(), d.cols(), &trip).expect("dense entries are in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
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

    /// Iterates the stored `(col, value)` pairs of row `i`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row_entries(i).filter(|(c, _)| *c == j).map(|(_, v)| v).sum()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let mut s = 0.0;
        for p in a..b {
            s += self.values[p] * x[self.col_idx[p]];
        }
        s
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        if self.nnz() >= 1 << 16 {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn matvec_t_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (c, v) in self.row_entries(i) {
                y[c] += xi * v;
            }
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (c, v) in self.row_entries(i) {
                d.add_to(i, c, v);
            }
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<(usize, usize, f64)> = (0..self.rows)
            .flat_map(|i| self.row_entries(i).map(move |(c, v)| (c, i, v)))
            .collect();
        Self::from_triplets(self.cols, self.rows, &trip).expect("transpose indices are in range")
    }
}
