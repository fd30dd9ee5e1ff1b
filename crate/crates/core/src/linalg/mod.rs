//! Matrix/vector substrate: dense and CSR storage behind one matrix handle, the
//! linear-operator contract every solver level is written against, and a few
//! spectral helpers.

pub mod csr;
pub mod dense;
pub mod eig;
pub mod factor;
pub mod vector;

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use csr::CsrMatrix;
pub use dense::DenseMatrix;
pub use factor::{Cholesky, Factorization, Lu};

use crate::error::{MspError, Result};
use crate::rng::{gaussian_vec, stream_rng, streams};
use vector::{dot, norm2};

/// Anything that can compute `y = A x`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

/// Square operator given by a closure.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// `A + shift * I`.
pub struct Shifted<A> {
    pub inner: A,
    pub shift: f64,
}

impl<A: LinearOperator> LinearOperator for Shifted<A> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply_into(x, y);
        if self.shift != 0.0 {
            vector::axpy(self.shift, x, y);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    General,
    SymmetricPsd,
}

#[derive(Clone, Debug)]
pub enum Storage {
    Dense(DenseMatrix),
    Csr(CsrMatrix),
}

/// Dense or CSR matrix with a declared symmetry flag and a lazily cached factorization.
#[derive(Clone, Debug)]
pub struct Matrix {
    storage: Storage,
    symmetry: Symmetry,
    factor: OnceLock<Factorization>,
}

impl From<DenseMatrix> for Matrix {
    fn from(d: DenseMatrix) -> Self {
        Matrix::dense(d)
    }
}

impl From<CsrMatrix> for Matrix {
    fn from(c: CsrMatrix) -> Self {
        Matrix::csr(c)
    }
}

/// Number of random `(i, j)` pairs checked when a matrix is declared symmetric.
const SYMMETRY_SAMPLES: usize = 100;

impl Matrix {
    pub fn dense(d: DenseMatrix) -> Self {
        Self {
            storage: Storage::Dense(d),
            symmetry: Symmetry::General,
            factor: OnceLock::new(),
        }
    }

    pub fn csr(c: CsrMatrix) -> Self {
        Self {
            storage: Storage::Csr(c),
            symmetry: Symmetry::General,
            factor: OnceLock::new(),
        }
    }

    /// Declares the matrix symmetric PSD. The claim is checked on the diagonal and on
    /// a fixed sample of off-diagonal pairs rather than by a full scan.
    pub fn into_symmetric_psd(mut self) -> Result<Self> {
        let (r, c) = (self.rows(), self.cols());
        if r != c {
            return Err(MspError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {r}x{c}"
            )));
        }
        let tol = 1e-12 * self.max_abs();
        let mut rng = stream_rng(r as u64, streams::SYMCHECK);
        if r > 0 {
            for _ in 0..SYMMETRY_SAMPLES {
                let i = rng.random_range(0..r);
                let j = rng.random_range(0..r);
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return Err(MspError::NotSymmetric { row: i, col: j });
                }
            }
        }
        self.symmetry = Symmetry::SymmetricPsd;
        self.factor = OnceLock::new();
        Ok(self)
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn rows(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.rows(),
            Storage::Csr(c) => c.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.cols(),
            Storage::Csr(c) => c.cols(),
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.data().iter().filter(|v| **v != 0.0).count(),
            Storage::Csr(c) => c.nnz(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.get(i, j),
            Storage::Csr(c) => c.get(i, j),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.max_abs(),
            Storage::Csr(c) => c.values().iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.trace(),
            Storage::Csr(c) => c.diag().iter().sum(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.frobenius_sq(),
            Storage::Csr(c) => c.values().iter().map(|v| v * v).sum(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Csr(c) => c.to_dense(),
        }
    }

    pub fn as_dense(&self) -> Option<&DenseMatrix> {
        match &self.storage {
            Storage::Dense(d) => Some(d),
            Storage::Csr(_) => None,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Csr(_))
    }

    /// `y = A^T x`.
    pub fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Dense(d) => d.matvec_t_into(x, y),
            Storage::Csr(c) => c.matvec_t_into(x, y),
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols()];
        self.apply_transpose_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Matrix {
        let storage = match &self.storage {
            Storage::Dense(d) => Storage::Dense(d.transpose()),
            Storage::Csr(c) => Storage::Csr(c.transpose()),
        };
        Matrix {
            storage,
            symmetry: self.symmetry,
            factor: OnceLock::new(),
        }
    }

    /// Returns the cached factorization, computing it on first use. Concurrent first
    /// callers may both factor; the results are identical and the first store wins.
    pub fn factorization(&self) -> Result<&Factorization> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        if self.rows() != self.cols() {
            return Err(MspError::DimensionMismatch(format!(
                "factorization needs a square matrix, got {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        let dense = self.to_dense();
        let f = match self.symmetry {
            Symmetry::SymmetricPsd => Factorization::Cholesky(Cholesky::new(&dense)?),
            Symmetry::General => Factorization::Lu(Lu::new(&dense)?),
        };
        let _ = self.factor.set(f);
        Ok(self.factor.get().expect("factor was just stored"))
    }

    pub fn is_factored(&self) -> bool {
        self.factor.get().is_some()
    }
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Dense(d) => d.matvec_into(x, y),
            Storage::Csr(c) => c.matvec_into(x, y),
        }
    }
}

/// `A x` with dimension checking.
pub fn matvec(a: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    vector::ensure_len(x, a.cols(), "matvec input")?;
    Ok(a.apply(x))
}

/// `A^{-1} b` through the factorization cached on `a` (Cholesky for symmetric-PSD
/// handles, pivoted LU otherwise).
pub fn dense_factor_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    vector::ensure_len(b, a.rows(), "factor-solve right-hand side")?;
    Ok(a.factorization()?.solve(b))
}

/// Multi-column variant of [`dense_factor_solve`].
pub fn dense_factor_solve_matrix(a: &Matrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != a.rows() {
        return Err(MspError::DimensionMismatch(format!(
            "factor-solve: {} rows vs {} rows",
            a.rows(),
            b.rows()
        )));
    }
    Ok(a.factorization()?.solve_matrix(b))
}

/// `sqrt(x^T B x)` for a PSD operator `B`.
///
/// Slightly negative quadratic forms produced by rounding are clamped to zero; anything
/// below `-1e-12 * |x| * |Bx|` is reported as a PSD violation.
pub fn norm_in<B: LinearOperator + ?Sized>(b: &B, x: &[f64]) -> Result<f64> {
    vector::ensure_len(x, b.ncols(), "norm_in vector")?;
    let bx = b.apply(x);
    let ip = dot(x, &bx);
    if ip >= 0.0 {
        return Ok(ip.sqrt());
    }
    let threshold = -1e-12 * norm2(x) * norm2(&bx);
    if ip >= threshold {
        Ok(0.0)
    } else {
        Err(MspError::NotPsd(ip))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Eigenvalues,
    SingularValues,
}

/// Eigen- or singular values sorted in non-increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    values: Vec<f64>,
    kind: SpectrumKind,
}

impl SpectrumSummary {
    pub fn new(mut values: Vec<f64>, kind: SpectrumKind) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values, kind }
    }

    pub fn eigenvalues(values: Vec<f64>) -> Self {
        Self::new(values, SpectrumKind::Eigenvalues)
    }

    pub fn singular_values(values: Vec<f64>) -> Self {
        Self::new(values, SpectrumKind::SingularValues)
    }

    /// Eigenvalues of a PSD matrix; small negative rounding noise is clamped to zero.
    pub fn psd_eigenvalues(values: Vec<f64>) -> Result<Self> {
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if values.iter().any(|&v| v < -1e-10 * scale.max(f64::MIN_POSITIVE)) {
            return Err(MspError::Domain("negative eigenvalue in PSD spectrum".into()));
        }
        Ok(Self::eigenvalues(values.into_iter().map(|v| v.max(0.0)).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues of `A^T A` when this holds singular values of `A`.
    pub fn squared(&self) -> Self {
        Self::eigenvalues(self.values.iter().map(|s| s * s).collect())
    }

    /// `sum_{i > l} v_i` (1-based `i`).
    pub fn tail_sum(&self, l: usize) -> f64 {
        self.values.iter().skip(l).sum()
    }
}

/// `d_lambda = sum_i lambda_i / (lambda_i + lambda)`.
pub fn effective_dimension(spec: &SpectrumSummary, lambda: f64) -> Result<f64> {
    if spec.kind() != SpectrumKind::Eigenvalues {
        return Err(MspError::Domain(
            "effective dimension needs eigenvalues, not singular values".into(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(MspError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(spec.values().iter().map(|&v| v / (v + lambda)).sum())
}

/// Averaged regularized tail condition number for a PSD spectrum:
/// `(1/(n-l)) * sum_{i>l} lambda_i / (lambda_n + lambda)`.
pub fn tail_condition_psd(spec: &SpectrumSummary, l: usize, lambda: f64) -> f64 {
    let v = spec.values();
    let n = v.len();
    if l >= n {
        return 0.0;
    }
    let denom = v[n - 1] + lambda;
    v[l..].iter().sum::<f64>() / ((n - l) as f64 * denom)
}

/// Averaged tail condition number in terms of singular values:
/// `((1/(n-l)) * sum_{i>l} sigma_i^2 / (sigma_n^2 + lambda))^{1/2}`.
pub fn tail_condition_general(sv: &SpectrumSummary, l: usize, lambda: f64) -> f64 {
    tail_condition_psd(&sv.squared(), l, lambda).sqrt()
}

/// Power-method estimate of the spectral norm of a symmetric operator. The returned
/// value is `|A x_k|` for a unit vector `x_k`, so it never exceeds the true norm.
pub fn power_method_norm<A: LinearOperator + ?Sized>(a: &A, iters: usize, seed: u64) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut rng = stream_rng(seed, streams::POWER);
    let mut x = gaussian_vec(&mut rng, n);
    let nx = norm2(&x);
    vector::scale(1.0 / nx, &mut x);
    let mut est = 0.0;
    let mut y = vec![0.0; a.nrows()];
    for _ in 0..iters.max(1) {
        a.apply_into(&x, &mut y);
        let ny = norm2(&y);
        if ny == 0.0 {
            return 0.0;
        }
        est = ny;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    est
}

/// Default iteration count for [`power_method_norm`], logarithmic in the dimension.
pub fn default_power_iters(n: usize) -> usize {
    20 + (4.0 * (n.max(2) as f64).ln()).ceil() as usize
}

/// Spectral-norm estimate of a rectangular matrix via the power method on `A^T A`.
pub fn matrix_norm_estimate(a: &Matrix, iters: usize, seed: u64) -> f64 {
    let op = FnOperator::new(a.cols(), |x: &[f64], y: &mut [f64]| {
        let ax = a.apply(x);
        a.apply_transpose_into(&ax, y);
    });
    power_method_norm(&op, iters, seed).sqrt()
}
