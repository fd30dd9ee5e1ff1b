//! Dense spectral utilities (eigendecomposition, SVD, matrix powers) backed by nalgebra.
//! Used for oracles, diagnostics and small projected problems, never inside the
//! level-1 hot loop.

use crate::error::{MspError, Result};
use crate::linalg::dense::DenseMatrix;

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: DenseMatrix,
}

pub fn sym_eigen(a: &DenseMatrix) -> Result<SymEigen> {
    if a.rows() != a.cols() {
        return Err(MspError::DimensionMismatch("eigendecomposition needs a square matrix".into()));
    }
    let mut m = a.clone();
    m.symmetrize();
    let eig = nalgebra::SymmetricEigen::new(m.to_nalgebra());
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(sym_eigen(a)?.values)
}

/// `A^p` for symmetric PSD `A`; eigenvalues below `floor` are clamped to `floor`.
pub fn sym_power(a: &DenseMatrix, p: f64, floor: f64) -> Result<DenseMatrix> {
    let SymEigen { values, vectors } = sym_eigen(a)?;
    let n = a.rows();
    let scaled: Vec<f64> = values.iter().map(|&v| v.max(floor).powf(p)).collect();
    let vs = DenseMatrix::from_fn(n, n, |i, k| vectors.get(i, k) * scaled[k]);
    let mut out = vs.matmul(&vectors.transpose())?;
    out.symmetrize();
    Ok(out)
}

/// Singular values, descending.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let svd = nalgebra::SVD::new(a.to_nalgebra(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Condition number of `B^{-1/2} A B^{-1/2}` for symmetric positive definite `A`, `B`.
pub fn whitened_condition(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let ev = whitened_eigenvalues(a, b)?;
    let max = ev.first().copied().unwrap_or(1.0);
    let min = ev.last().copied().unwrap_or(1.0);
    Ok(max / min)
}

/// Eigenvalues of `B^{-1/2} A B^{-1/2}`, descending.
pub fn whitened_eigenvalues(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    let b_ihalf = sym_power(b, -0.5, 0.0)?;
    let w = b_ihalf.matmul(a)?.matmul(&b_ihalf)?;
    sym_eigenvalues(&w)
}
