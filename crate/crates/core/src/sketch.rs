//! Sparse sketching matrices.
//!
//! A [`SparseEmbedding`] is an `s x n` matrix whose columns are independent and hold
//! exactly `gamma` nonzeros of value `±1/sqrt(gamma)` at distinct rows. Column `j` is
//! generated from its own counter-based stream keyed by `(seed, j)`, so the structure
//! is reproducible bit-for-bit and can be rebuilt from `(seed, s, n, gamma)` alone.
//!
//! [`OseSketch`] wraps a sparse embedding sized to act as an oblivious subspace
//! embedding for `d`-dimensional subspaces.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};
use crate::linalg::{DenseMatrix, Matrix, Storage};
use crate::rng::{stream_rng, streams};

/// Serializable description; the structure itself is always regenerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchDescriptor {
    pub seed: u64,
    pub s: usize,
    pub n: usize,
    pub gamma: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseEmbedding {
    s: usize,
    n: usize,
    gamma: usize,
    seed: u64,
    /// `rows[j*gamma .. (j+1)*gamma]` are the nonzero rows of column `j`.
    rows: Vec<usize>,
    /// Matching entries, already scaled by `1/sqrt(gamma)`.
    vals: Vec<f64>,
}

/// Draws `gamma` distinct values from `0..s` by a partial Fisher-Yates shuffle. Only the
/// touched positions of the virtual permutation are stored.
fn partial_fisher_yates<R: Rng>(rng: &mut R, s: usize, gamma: usize, out: &mut Vec<usize>) {
    let mut swapped: Vec<(usize, usize)> = Vec::with_capacity(gamma);
    let lookup = |swapped: &[(usize, usize)], i: usize| {
        swapped
            .iter()
            .rev()
            .find(|(k, _)| *k == i)
            .map_or(i, |(_, v)| *v)
    };
    for i in 0..gamma {
        let j = rng.random_range(i..s);
        let vi = lookup(&swapped, i);
        let vj = lookup(&swapped, j);
        swapped.push((j, vi));
        swapped.push((i, vj));
        out.push(vj);
    }
}

pub fn make_sparse_embedding(s: usize, n: usize, gamma: usize, seed: u64) -> Result<SparseEmbedding> {
    if gamma == 0 || s == 0 {
        return Err(MspError::Domain(format!(
            "sparse embedding needs gamma >= 1 and s >= 1 (got s={s}, gamma={gamma})"
        )));
    }
    if gamma > s {
        return Err(MspError::Domain(format!("gamma ({gamma}) exceeds row count s ({s})")));
    }
    let scale = 1.0 / (gamma as f64).sqrt();
    let cols: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, streams::SKETCH ^ j as u64);
            let mut rows = Vec::with_capacity(gamma);
            partial_fisher_yates(&mut rng, s, gamma, &mut rows);
            let vals = (0..gamma)
                .map(|_| if rng.random::<bool>() { scale } else { -scale })
                .collect();
            (rows, vals)
        })
        .collect();
    let mut rows = Vec::with_capacity(n * gamma);
    let mut vals = Vec::with_capacity(n * gamma);
    for (r, v) in cols {
        rows.extend(r);
        vals.extend(v);
    }
    Ok(SparseEmbedding {
        s,
        n,
        gamma,
        seed,
        rows,
        vals,
    })
}

impl SparseEmbedding {
    pub fn from_descriptor(d: SketchDescriptor) -> Result<Self> {
        make_sparse_embedding(d.s, d.n, d.gamma, d.seed)
    }

    /// The `n x n` identity written as a sparse embedding with `gamma = 1`.
    pub fn identity(n: usize) -> Self {
        Self {
            s: n,
            n,
            gamma: 1,
            seed: 0,
            rows: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn descriptor(&self) -> SketchDescriptor {
        SketchDescriptor {
            seed: self.seed,
            s: self.s,
            n: self.n,
            gamma: self.gamma,
        }
    }

    pub fn rows(&self) -> usize {
        self.s
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(row, value)` pairs of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let g = self.gamma;
        self.rows[j * g..(j + 1) * g]
            .iter()
            .copied()
            .zip(self.vals[j * g..(j + 1) * g].iter().copied())
    }

    pub fn materialize(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.s, self.n);
        for j in 0..self.n {
            for (r, v) in self.column(j) {
                d.add_to(r, j, v);
            }
        }
        d
    }

    /// `S x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.s];
        for (j, xj) in x.iter().enumerate() {
            for (r, v) in self.column(j) {
                y[r] += v * xj;
            }
        }
        y
    }

    /// `S^T y`
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.column(j).map(|(r, v)| v * y[r]).sum())
            .collect()
    }
}

/// `A S^T` (`m x s`, dense) in `O(gamma * nnz(A))`.
pub fn sketch_apply_right(a: &Matrix, s: &SparseEmbedding) -> Result<DenseMatrix> {
    if a.cols() != s.cols() {
        return Err(MspError::DimensionMismatch(format!(
            "A S^T: A has {} columns, S has {}",
            a.cols(),
            s.cols()
        )));
    }
    let (m, k) = (a.rows(), s.rows());
    if k == 0 {
        return Ok(DenseMatrix::zeros(m, 0));
    }
    let fill_row = |i: usize, orow: &mut [f64]| match a.storage() {
        Storage::Dense(d) => {
            for (j, &aij) in d.row(i).iter().enumerate() {
                if aij != 0.0 {
                    for (r, v) in s.column(j) {
                        orow[r] += aij * v;
                    }
                }
            }
        }
        Storage::Csr(c) => {
            for (j, aij) in c.row_entries(i) {
                for (r, v) in s.column(j) {
                    orow[r] += aij * v;
                }
            }
        }
    };
    let mut data = vec![0.0; m * k];
    data.par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, orow)| fill_row(i, orow));
    DenseMatrix::from_row_major(m, k, data)
}

/// `S B` (`s x k`, dense) in `O(gamma * nnz(B))`.
pub fn sketch_apply_left(s: &SparseEmbedding, b: &Matrix) -> Result<DenseMatrix> {
    if b.rows() != s.cols() {
        return Err(MspError::DimensionMismatch(format!(
            "S B: S has {} columns, B has {} rows",
            s.cols(),
            b.rows()
        )));
    }
    let k = b.cols();
    let mut out = DenseMatrix::zeros(s.rows(), k);
    match b.storage() {
        Storage::Dense(d) => {
            for j in 0..s.cols() {
                let brow = d.row(j);
                for (r, v) in s.column(j) {
                    for (o, bj) in out.row_mut(r).iter_mut().zip(brow) {
                        *o += v * bj;
                    }
                }
            }
        }
        Storage::Csr(c) => {
            for j in 0..s.cols() {
                for (r, v) in s.column(j) {
                    for (col, bv) in c.row_entries(j) {
                        out.add_to(r, col, v * bv);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Dense-input convenience for [`sketch_apply_left`].
pub fn sketch_dense_left(s: &SparseEmbedding, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != s.cols() {
        return Err(MspError::DimensionMismatch(format!(
            "S B: S has {} columns, B has {} rows",
            s.cols(),
            b.rows()
        )));
    }
    let mut out = DenseMatrix::zeros(s.rows(), b.cols());
    for j in 0..s.cols() {
        let brow = b.row(j);
        for (r, v) in s.column(j) {
            for (o, bj) in out.row_mut(r).iter_mut().zip(brow) {
                *o += v * bj;
            }
        }
    }
    Ok(out)
}

/// Oblivious subspace embedding for `d`-dimensional subspaces of `R^n`.
#[derive(Clone, Debug)]
pub struct OseSketch {
    embedding: SparseEmbedding,
    d: usize,
    delta: f64,
    epsilon: f64,
    identity: bool,
}

/// `phi = min(n, ceil(c * (d + ln(1/delta)) / eps^2))` rows and
/// `max(2, ceil(ln(d/delta)))` nonzeros per column; identity when `phi == n`.
pub fn make_ose_with(n: usize, d: usize, delta: f64, epsilon: f64, c_phi: f64, seed: u64) -> Result<OseSketch> {
    if d == 0 || d > n {
        return Err(MspError::Domain(format!("OSE needs 1 <= d <= n (d={d}, n={n})")));
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(MspError::Domain(format!("OSE epsilon must be in (0, 1/2], got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(MspError::Domain(format!("OSE delta must be in (0, 1/2), got {delta}")));
    }
    let phi = ose_rows(n, d, delta, epsilon, c_phi);
    if phi >= n {
        return Ok(OseSketch {
            embedding: SparseEmbedding::identity(n),
            d,
            delta,
            epsilon,
            identity: true,
        });
    }
    let gamma = ((d as f64 / delta).ln().ceil() as usize).max(2).min(phi);
    let embedding = make_sparse_embedding(phi, n, gamma, seed ^ streams::OSE)?;
    Ok(OseSketch {
        embedding,
        d,
        delta,
        epsilon,
        identity: false,
    })
}

pub fn make_ose(n: usize, d: usize, delta: f64, epsilon: f64, seed: u64) -> Result<OseSketch> {
    make_ose_with(n, d, delta, epsilon, 4.0, seed)
}

/// Uncapped OSE row count (before the `min(n, .)`).
pub fn ose_rows_uncapped(d: usize, delta: f64, epsilon: f64, c_phi: f64) -> usize {
    (c_phi * (d as f64 + (1.0 / delta).ln()) / (epsilon * epsilon)).ceil() as usize
}

fn ose_rows(n: usize, d: usize, delta: f64, epsilon: f64, c_phi: f64) -> usize {
    ose_rows_uncapped(d, delta, epsilon, c_phi).min(n)
}

impl OseSketch {
    pub fn embedding(&self) -> &SparseEmbedding {
        &self.embedding
    }

    pub fn rows(&self) -> usize {
        self.embedding.rows()
    }

    pub fn cols(&self) -> usize {
        self.embedding.cols()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn subspace_dim(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `Phi B` for dense `B` with `n` rows.
    pub fn apply_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.identity {
            if b.rows() != self.cols() {
                return Err(MspError::DimensionMismatch("OSE input rows".into()));
            }
            return Ok(b.clone());
        }
        sketch_dense_left(&self.embedding, b)
    }
}
