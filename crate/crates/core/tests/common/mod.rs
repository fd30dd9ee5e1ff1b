//! Independent oracles shared by the integration tests. Everything numerical here goes
//! through nalgebra or plain loops, never through the library's own factorizations.
#![allow(dead_code)]

use msp::linalg::{DenseMatrix, Matrix};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_0000)
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn dense_of(a: &Matrix) -> DMatrix<f64> {
    na(&a.to_dense())
}

/// Orthonormal `n x d` block from a thin QR of a Gaussian matrix.
pub fn orthonormal(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let g = DMatrix::from_vec(n, d, gaussian(n * d, seed));
    g.qr().q().columns(0, d).into_owned()
}

/// `U diag(sigma) Vᵀ` with known factors.
pub struct Svd {
    pub a: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Tall matrix with `k` singular values spread over `ratio * [1, 2]` and the rest over `[1, 2]`.
pub fn tall_instance(m: usize, n: usize, k: usize, ratio: f64, seed: u64) -> Svd {
    let u = orthonormal(m, n, seed.wrapping_mul(2).wrapping_add(1));
    let v = orthonormal(n, n, seed.wrapping_mul(2).wrapping_add(2));
    let spaced = |c: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..c).map(|i| if c == 1 { hi } else { hi - (hi - lo) * i as f64 / (c - 1) as f64 }).collect()
    };
    let mut sigma = spaced(k, ratio, 2.0 * ratio);
    sigma.extend(spaced(n - k, 1.0, 2.0));
    let a = &u * DMatrix::from_diagonal(&DVector::from_vec(sigma.clone())) * v.transpose();
    Svd { a, u, sigma, v }
}

pub fn to_matrix(a: &DMatrix<f64>) -> Matrix {
    Matrix::dense(from_na(a))
}

pub fn shifted(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    a + DMatrix::identity(a.nrows(), a.ncols()) * lambda
}

/// `AᵀA + λI`.
pub fn normal(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    shifted(&(a.transpose() * a), lambda)
}

pub fn spd_solve(k: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let chol = k.clone().cholesky().expect("oracle matrix is SPD");
    chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()
}

pub fn lu_solve(k: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    k.clone().lu().solve(&DVector::from_column_slice(b)).expect("nonsingular").as_slice().to_vec()
}

/// Least-squares minimizer by Householder QR.
pub fn lstsq(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * DVector::from_column_slice(b);
    let r = qr.r();
    let x = r.solve_upper_triangular(&qtb.rows(0, n).into_owned()).expect("full rank");
    x.as_slice().to_vec()
}

pub fn energy(k: &DMatrix<f64>, v: &[f64]) -> f64 {
    let x = DVector::from_column_slice(v);
    (x.dot(&(k * &x))).max(0.0).sqrt()
}

/// `|x - x*|_K / |x*|_K`.
pub fn rel_energy_err(k: &DMatrix<f64>, x: &[f64], x_star: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(x_star).map(|(p, q)| p - q).collect();
    energy(k, &d) / energy(k, x_star)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sym_eigs(a: &DMatrix<f64>) -> Vec<f64> {
    let s = (a + a.transpose()) * 0.5;
    let mut v: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Eigenvalues of `B^{-1/2} A B^{-1/2}` (equivalently of `L^{-1} A L^{-T}` with `B = L Lᵀ`), descending.
pub fn pencil_eigs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let l = b.clone().cholesky().expect("pencil matrix is SPD").l();
    let x = l.solve_lower_triangular(a).expect("triangular");
    let y = l.solve_lower_triangular(&x.transpose()).expect("triangular");
    sym_eigs(&y)
}

pub fn pencil_condition(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let e = pencil_eigs(a, b);
    e[0] / e[e.len() - 1]
}

/// `M^{-1/2}` for SPD `M` by eigendecomposition.
pub fn inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = (m + m.transpose()) * 0.5;
    let e = s.symmetric_eigen();
    let d = e.eigenvalues.map(|v| 1.0 / v.sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Unpreconditioned Lanczos/CG-equivalent Galerkin iterate with full reorthogonalization:
/// `x_t = V_t (V_tᵀ A V_t)^{-1} V_tᵀ b` on the Krylov space of `M^{-1}A` in the `M` inner product,
/// realized through the symmetric form `M^{-1/2} A M^{-1/2}`.
pub fn galerkin_iterate(a: &DMatrix<f64>, b: &[f64], m_inv_half: &DMatrix<f64>, t: usize) -> Vec<f64> {
    let h = m_inv_half * a * m_inv_half;
    let rhs = m_inv_half * DVector::from_column_slice(b);
    let n = b.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut v = rhs.clone() / rhs.norm();
    for _ in 0..t.min(n) {
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let nv = v.norm();
        if nv < 1e-300 {
            break;
        }
        v /= nv;
        basis.push(v.clone());
        v = &h * &v;
    }
    let q = DMatrix::from_columns(&basis);
    let tq = q.transpose() * &h * &q;
    let y = tq.lu().solve(&(q.transpose() * &rhs)).expect("projected system");
    (m_inv_half * (q * y)).as_slice().to_vec()
}

/// Textbook conjugate gradients, `t` steps from zero.
pub fn plain_cg(a: &DMatrix<f64>, b: &[f64], t: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = DVector::from_column_slice(b);
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for _ in 0..t {
        let ap = a * &p;
        let alpha = rr / p.dot(&ap);
        x += &p * alpha;
        r -= &ap * alpha;
        let rr_new = r.dot(&r);
        if rr_new == 0.0 {
            break;
        }
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    x.as_slice().to_vec()
}

/// Random SPD matrix `Q diag(values) Qᵀ`.
pub fn spd_with_spectrum(values: &[f64], seed: u64) -> DMatrix<f64> {
    let n = values.len();
    let q = orthonormal(n, n, seed);
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Spectrum of `k` values in `ratio * [1, 2]` over `n - k` values in `[1, 2]`, descending.
pub fn k_large_values(n: usize, k: usize, ratio: f64) -> Vec<f64> {
    let spaced = |c: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..c).map(|i| if c == 1 { hi } else { hi - (hi - lo) * i as f64 / (c - 1) as f64 }).collect()
    };
    let mut v = spaced(k, ratio, 2.0 * ratio);
    v.extend(spaced(n - k, 1.0, 2.0));
    v
}
