//! The hidden-rotation lower-bound instance: solving `Ax = 1` reveals the rotated
//! coordinate pair through the single zero of the solution.

use msp::harness::{gen_instance, InstanceSpec};
use msp::linalg::eig::singular_values;
use msp::{solve_square, GeneralSolveConfig};

fn main() -> msp::Result<()> {
    let (n, i, j) = (300, 41, 257);
    let inst = gen_instance(&InstanceSpec::hidden_rotation(n, i, j))?;
    let report = solve_square(&inst.a, &inst.b, &GeneralSolveConfig::new(16, 0.0, 1e-8))?;

    let zero = report
        .x
        .iter()
        .enumerate()
        .min_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
        .map(|(k, _)| k)
        .unwrap();
    // Column i of A carries the -1 in row j.
    let partner = (0..n).find(|&r| r != zero && inst.a.get(r, zero) != 0.0).unwrap();
    println!("recovered pair ({zero}, {partner}), planted ({i}, {j})");
    let sv = singular_values(&inst.a.to_dense());
    println!("top singular values {:.12} {:.12} {:.12}", sv[0], sv[1], sv[2]);
    Ok(())
}
