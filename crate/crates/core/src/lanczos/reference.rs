//! Symmetrically preconditioned Lanczos with explicit dense `M^{-1/2}`. Only usable at
//! test scale; it serves as the reference the left-preconditioned iteration is
//! checked against.

use crate::error::{MspError, Result};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::linalg::DenseMatrix;

use super::tridiag::{tridiag_solve_e1, TridiagonalMatrix};

/// Largest dimension accepted by [`symmetric_lanczos_reference`].
pub const REFERENCE_MAX_N: usize = 500;

/// Runs `t` steps on `M^{-1/2} A M^{-1/2}` and returns `M^{-1/2} (z Q T^{-1} e_1)`.
pub fn symmetric_lanczos_reference(
    a: &DenseMatrix,
    b: &[f64],
    m_inv_half: &DenseMatrix,
    t: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    if n > REFERENCE_MAX_N {
        return Err(MspError::SizeGuard(format!(
            "reference Lanczos limited to n <= {REFERENCE_MAX_N}, got {n}"
        )));
    }
    if a.rows() != n || a.cols() != n || m_inv_half.rows() != n || m_inv_half.cols() != n {
        return Err(MspError::DimensionMismatch("reference Lanczos operands".into()));
    }
    if t == 0 {
        return Err(MspError::Domain("reference Lanczos needs t >= 1".into()));
    }
    let op = |q: &[f64]| m_inv_half.matvec(&a.matvec(&m_inv_half.matvec(q)));

    let w0 = m_inv_half.matvec(b);
    let z = norm2(&w0);
    if z == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut q_prev = vec![0.0; n];
    let mut q: Vec<f64> = w0.iter().map(|v| v / z).collect();
    let mut beta = 0.0;
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut basis = Vec::new();
    for _ in 0..t {
        let mut u = op(&q);
        axpy(-beta, &q_prev, &mut u);
        let alpha = dot(&u, &q);
        axpy(-alpha, &q, &mut u);
        alphas.push(alpha);
        basis.push(q.clone());
        let beta_next = norm2(&u);
        if beta_next <= 1e-14 * (alpha.abs() + beta) {
            break;
        }
        if alphas.len() == t {
            break;
        }
        betas.push(beta_next);
        q_prev = std::mem::replace(&mut q, u.iter().map(|v| v / beta_next).collect());
        beta = beta_next;
    }
    let tri = TridiagonalMatrix::new(alphas, betas)?;
    let y = tridiag_solve_e1(&tri, z)?;
    let mut v = vec![0.0; n];
    for (k, yk) in y.iter().enumerate() {
        axpy(*yk, &basis[k], &mut v);
    }
    Ok(m_inv_half.matvec(&v))
}
