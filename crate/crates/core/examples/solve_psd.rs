//! Solve a shifted PSD system with a few dominant eigenvalues and compare with a
//! dense Cholesky solve.

use msp::harness::{gen_instance, InstanceSpec};
use msp::linalg::vector::{norm2, sub};
use msp::linalg::{dense_factor_solve, Matrix};
use msp::{solve_psd, PsdSolveConfig};

fn main() -> msp::Result<()> {
    let inst = gen_instance(&InstanceSpec::k_large_psd(512, 16, 1e4, 1))?;
    let cfg = PsdSolveConfig::new(32, 0.0, 1e-8).with_seed(1);
    let report = solve_psd(&inst.a, &inst.b, &cfg)?;

    let x_star = dense_factor_solve(&Matrix::dense(inst.a.to_dense()), &inst.b)?;
    let rel = norm2(&sub(&report.x, &x_star)) / norm2(&x_star);
    println!("status          {:?}", report.status);
    println!("level-1 iters   {}", report.iterations.level1);
    println!("level-2 iters   {}", report.iterations.level2_total);
    println!("matvecs         {}", report.matvecs);
    println!("residual        {:.3e}", report.final_residual);
    println!("error vs dense  {rel:.3e}");
    if let Some(p) = &report.preconditioner {
        println!("sketch rows s   {}  (lambda_tilde = {:.3e})", p.s, p.lambda_tilde);
    }
    Ok(())
}
