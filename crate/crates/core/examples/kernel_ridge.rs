//! Kernel ridge regression on clustered points. The effective dimension is
//! estimated by cheap bootstrap solves and sets the sketch rank.

use msp::apps::{clustered_points, solve_krr, KernelKind, KernelSpec, KrrConfig};
use msp::linalg::LinearOperator;

fn main() -> msp::Result<()> {
    let n = 1000;
    let points = clustered_points(n, 2, 8, 1.0, 11);
    let k = KernelSpec::new(KernelKind::Rbf { bandwidth: 1.0 }, points)?.matrix()?;
    let y: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();

    let report = solve_krr(&k, &y, &KrrConfig::new(0.01 * n as f64, 1e-6).with_seed(11))?;
    println!("status        {:?}", report.status);
    println!("level-1 iters {}", report.iterations.level1);
    println!("d_lambda est  {}", report.config["d_lambda_estimate"]);
    println!("chosen l      {}", report.config["l"]);
    let fit = k.apply(&report.x);
    println!("fitted[0..4]  {:?}", &fit[..4]);
    Ok(())
}
