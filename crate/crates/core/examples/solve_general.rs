//! Solve a square nonsymmetric system `Ax = b` through the normal equations
//! `AᵀA x = Aᵀb` with the three-level solver.

use msp::harness::{gen_instance, InstanceSpec};
use msp::linalg::vector::norm2;
use msp::linalg::LinearOperator;
use msp::{solve_square, GeneralSolveConfig};

fn main() -> msp::Result<()> {
    let inst = gen_instance(&InstanceSpec::k_large_general(384, 384, 12, 1e3, 3))?;
    let cfg = GeneralSolveConfig::new(24, 0.0, 1e-8).with_seed(3);
    let report = solve_square(&inst.a, &inst.b, &cfg)?;

    let ax = inst.a.apply(&report.x);
    let res: Vec<f64> = ax.iter().zip(&inst.b).map(|(p, q)| p - q).collect();
    println!("status        {:?}", report.status);
    println!("iterations    {:?}", report.iterations);
    if let Some(p) = &report.preconditioner {
        println!("sketch        s = {}, phi = {}", p.s, p.phi);
    }
    println!("|Ax-b|/|b|    {:.3e}", norm2(&res) / norm2(&inst.b));
    Ok(())
}
