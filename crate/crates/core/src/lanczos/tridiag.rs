use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};
use crate::linalg::{eig, DenseMatrix};

/// Symmetric tridiagonal matrix: diagonal `alphas` (length `t`) and off-diagonal
/// `betas` (length `t - 1`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalMatrix {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || betas.len() + 1 != alphas.len() {
            return Err(MspError::DimensionMismatch(format!(
                "tridiagonal needs t >= 1 diagonal and t-1 off-diagonal entries (got {} and {})",
                alphas.len(),
                betas.len()
            )));
        }
        Ok(Self { alphas, betas })
    }

    pub(crate) fn empty() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub(crate) fn push_alpha(&mut self, a: f64) {
        debug_assert_eq!(self.alphas.len(), self.betas.len());
        self.alphas.push(a);
    }

    pub(crate) fn push_beta(&mut self, b: f64) {
        debug_assert_eq!(self.alphas.len(), self.betas.len() + 1);
        self.betas.push(b);
    }

    /// Leading `t x t` block.
    pub fn leading(&self, t: usize) -> Self {
        let t = t.min(self.dim());
        Self {
            alphas: self.alphas[..t].to_vec(),
            betas: self.betas[..t.saturating_sub(1)].to_vec(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let t = self.dim();
        let mut d = DenseMatrix::from_diag(&self.alphas);
        for (i, b) in self.betas.iter().enumerate() {
            d.set(i, i + 1, *b);
            d.set(i + 1, i, *b);
        }
        debug_assert_eq!(d.rows(), t);
        d
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.dim() {
            let off = if i == 0 { 0.0 } else { self.betas[i - 1] * self.betas[i - 1] };
            d = self.alphas[i] - x - if i == 0 { 0.0 } else { off / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.alphas[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let t = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..t {
            let r = if i > 0 { self.betas[i - 1].abs() } else { 0.0 }
                + if i + 1 < t { self.betas[i].abs() } else { 0.0 };
            lo = lo.min(self.alphas[i] - r);
            hi = hi.max(self.alphas[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn kth_eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let width = (hi - lo).abs().max(f64::MIN_POSITIVE);
        lo -= 1e-12 * width;
        hi += 1e-12 * width;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `(smallest, largest)` eigenvalue.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let t = self.dim();
        (self.kth_eigenvalue(0), self.kth_eigenvalue(t - 1))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eig::sym_eigenvalues(&self.to_dense())
    }
}

/// `scale * T^{-1} e_1`.
///
/// Uses an `LDL^T` factorization without pivoting; a pivot below `1e-14 * max|alpha|`
/// switches to a dense eigendecomposition of `T`.
pub fn tridiag_solve_e1(t: &TridiagonalMatrix, scale: f64) -> Result<Vec<f64>> {
    let n = t.dim();
    if n == 0 {
        return Err(MspError::DimensionMismatch("empty tridiagonal".into()));
    }
    let a = t.alphas();
    let b = t.betas();
    let amax = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-14 * amax.max(f64::MIN_POSITIVE);
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = a[0];
    let mut ok = d[0].abs() >= tol;
    if ok {
        for i in 0..n - 1 {
            l[i] = b[i] / d[i];
            d[i + 1] = a[i + 1] - l[i] * b[i];
            if d[i + 1].abs() < tol || !d[i + 1].is_finite() {
                ok = false;
                break;
            }
        }
    }
    if !ok {
        return tridiag_solve_e1_dense(t, scale);
    }
    // L z = scale e_1
    let mut z = vec![0.0; n];
    z[0] = scale;
    for i in 1..n {
        z[i] = -l[i - 1] * z[i - 1];
    }
    // D L^T x = z
    let mut x = vec![0.0; n];
    x[n - 1] = z[n - 1] / d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = z[i] / d[i] - l[i] * x[i + 1];
    }
    Ok(x)
}

fn tridiag_solve_e1_dense(t: &TridiagonalMatrix, scale: f64) -> Result<Vec<f64>> {
    let e = eig::sym_eigen(&t.to_dense())?;
    let n = t.dim();
    let lmax = e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if e.values.iter().any(|v| v.abs() <= 1e-14 * lmax) || lmax == 0.0 {
        return Err(MspError::Breakdown("tridiagonal matrix is singular".into()));
    }
    let mut x = vec![0.0; n];
    for k in 0..n {
        let c = scale * e.vectors.get(0, k) / e.values[k];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += c * e.vectors.get(i, k);
        }
    }
    Ok(x)
}
