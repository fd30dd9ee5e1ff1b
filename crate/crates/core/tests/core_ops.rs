mod common;

use common::*;
use msp::linalg::{
    dense_factor_solve, effective_dimension, matvec, norm_in, power_method_norm, CsrMatrix, DenseMatrix,
    LinearOperator, Matrix, SpectrumSummary,
};
use msp::MspError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn matvec_small_dense() {
    let a = Matrix::dense(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    assert_eq!(matvec(&a, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    assert!(matches!(matvec(&a, &[1.0]), Err(MspError::DimensionMismatch(_))));
}

#[test]
fn matvec_csr_matches_dense() {
    let c = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 2, -1.0), (2, 1, 4.0), (2, 2, 0.5)]).unwrap();
    let x = [1.0, 2.0, 3.0];
    let sparse = matvec(&Matrix::csr(c.clone()), &x).unwrap();
    let dense = matvec(&Matrix::dense(c.to_dense()), &x).unwrap();
    assert_eq!(sparse, vec![2.0, -3.0, 9.5]);
    assert_eq!(sparse, dense);
}

#[test]
fn norm_in_diagonal() {
    let d = DenseMatrix::from_diag(&[4.0, 9.0]);
    let v = norm_in(&d, &[1.0, 1.0]).unwrap();
    assert!((v - 13f64.sqrt()).abs() < 1e-15);
}

#[test]
fn effective_dimension_examples() {
    let spec = SpectrumSummary::psd_eigenvalues(vec![1.0; 10]).unwrap();
    assert!((effective_dimension(&spec, 1.0).unwrap() - 5.0).abs() < 1e-14);
    let spec = SpectrumSummary::psd_eigenvalues(vec![3.0, 1.0]).unwrap();
    assert!((effective_dimension(&spec, 1.0).unwrap() - 1.25).abs() < 1e-14);
    assert!(effective_dimension(&spec, -1.0).is_err());
    assert!(SpectrumSummary::psd_eigenvalues(vec![1.0, -0.5]).is_err());
}

#[test]
fn power_method_on_diagonal() {
    let d = DenseMatrix::from_diag(&[1.0, 5.0, 2.0, 3.0]);
    let est = power_method_norm(&d, 60, 3);
    assert!((est - 5.0).abs() < 1e-6, "{est}");
}

#[test]
fn dense_factor_solve_matches_nalgebra() {
    let a = spd_with_spectrum(&(1..=20).map(|i| i as f64).collect::<Vec<_>>(), 8);
    let b = gaussian(20, 9);
    let x = dense_factor_solve(&to_matrix(&a), &b).unwrap();
    let expect = spd_solve(&a, &b);
    assert!(norm(&x.iter().zip(&expect).map(|(p, q)| p - q).collect::<Vec<_>>()) < 1e-12 * norm(&expect));
}

/// Textbook Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn dense_strategy(max: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1..max, 1..max).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-10.0..10.0f64, r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_adjoint_consistent((r, c, data) in dense_strategy(12), seed in 0u64..1000) {
        let a = Matrix::dense(DenseMatrix::from_row_major(r, c, data).unwrap());
        let x = gaussian(c, seed);
        let y = gaussian(r, seed + 1);
        let lhs: f64 = y.iter().zip(a.apply(&x)).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(a.apply_transpose(&y)).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn csr_adjoint_consistent(
        r in 1usize..15,
        c in 1usize..15,
        entries in prop::collection::vec((0usize..15, 0usize..15, -5.0..5.0f64), 0..40),
        seed in 0u64..1000,
    ) {
        let trips: Vec<_> = entries.into_iter().map(|(i, j, v)| (i % r, j % c, v)).collect();
        let csr = CsrMatrix::from_triplets(r, c, &trips).unwrap();
        let dense = csr.to_dense();
        let a = Matrix::csr(csr);
        let x = gaussian(c, seed);
        let y = gaussian(r, seed + 7);
        let ax = a.apply(&x);
        let dx = dense.matvec(&x);
        for (p, q) in ax.iter().zip(&dx) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
        let lhs: f64 = y.iter().zip(&ax).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(a.apply_transpose(&y)).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn effective_dimension_monotone_and_bounded(
        values in prop::collection::vec(0.0..100.0f64, 1..40),
        l1 in 1e-6..10.0f64,
        l2 in 1e-6..10.0f64,
    ) {
        let n = values.len() as f64;
        let spec = SpectrumSummary::psd_eigenvalues(values).unwrap();
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        let d_lo = effective_dimension(&spec, lo).unwrap();
        let d_hi = effective_dimension(&spec, hi).unwrap();
        prop_assert!(d_hi <= d_lo + 1e-12);
        prop_assert!(d_lo >= 0.0 && d_lo <= n + 1e-12);
    }

    /// For every `k`, `d_λ <= k + (1/λ) Σ_{i>k} λ_i`.
    #[test]
    fn effective_dimension_tail_bound(
        values in prop::collection::vec(0.0..100.0f64, 1..40),
        lambda in 1e-3..10.0f64,
    ) {
        let spec = SpectrumSummary::psd_eigenvalues(values.clone()).unwrap();
        let d = effective_dimension(&spec, lambda).unwrap();
        let mut sorted = values;
        sorted.sort_by(|a, b| b.total_cmp(a));
        for k in 0..=sorted.len() {
            let tail: f64 = sorted[k..].iter().sum();
            prop_assert!(d <= k as f64 + tail / lambda + 1e-9);
        }
    }

    #[test]
    fn factor_solve_matches_elimination(n in 1usize..10, seed in 0u64..500) {
        let g = DMatrix::from_vec(n, n, gaussian(n * n, seed));
        let a = &g * g.transpose() + DMatrix::identity(n, n);
        let b = gaussian(n, seed + 3);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
        let expect = gauss_solve(rows, b.clone());
        let x = dense_factor_solve(&to_matrix(&a), &b).unwrap();
        let scale = DVector::from_column_slice(&expect).norm().max(1.0);
        for (p, q) in x.iter().zip(&expect) {
            prop_assert!((p - q).abs() <= 1e-8 * scale);
        }
    }
}
