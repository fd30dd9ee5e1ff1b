//! Overdetermined least squares by sketch-and-precondition iterative refinement.

use msp::apps::{solve_least_squares, LeastSquaresConfig};
use msp::linalg::vector::norm2;
use msp::linalg::{DenseMatrix, LinearOperator, Matrix};
use msp::rng::{gaussian_vec, stream_rng};

fn main() -> msp::Result<()> {
    let (m, n) = (2048, 256);
    let mut rng = stream_rng(5, 0);
    let mut a = DenseMatrix::from_row_major(m, n, gaussian_vec(&mut rng, m * n))?;
    for j in 0..n {
        let scale = 10f64.powf(3.0 * j as f64 / n as f64);
        for i in 0..m {
            a.set(i, j, a.get(i, j) * scale);
        }
    }
    let a = Matrix::dense(a);
    let b = gaussian_vec(&mut rng, m);

    let cfg = LeastSquaresConfig::new(1e-10, 16).with_seed(5);
    let report = solve_least_squares(&a, &b, &cfg)?;
    let r: Vec<f64> = a.apply(&report.x).iter().zip(&b).map(|(p, q)| q - p).collect();
    println!("status       {:?}", report.status);
    println!("outer steps  {} (budget {})", report.iterations.level1, cfg.budget());
    println!("|b-Ax|^2     {:.6e}", norm2(&r).powi(2));
    println!("|Aᵀr|/|Aᵀb|  {:.3e}", norm2(&a.apply_transpose(&r)) / norm2(&a.apply_transpose(&b)));
    Ok(())
}
