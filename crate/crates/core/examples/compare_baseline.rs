//! Plain Lanczos against the sketched preconditioner on a spectrum with a few huge
//! eigenvalues, with residuals recomputed by the harness.

use msp::harness::{gen_instance, run_compare, CompareOptions, InstanceSpec, SolverKind};

fn main() -> msp::Result<()> {
    let spec = InstanceSpec::k_large_psd(1024, 32, 1e6, 0);
    let inst = gen_instance(&spec)?;
    let opts = CompareOptions {
        solvers: vec![SolverKind::PlainLanczos, SolverKind::MspPsd, SolverKind::DenseDirect],
        eps: 1e-6,
        l: 64,
        ..CompareOptions::default()
    };
    let report = run_compare(&inst.a, &inst.b, serde_json::to_value(&spec).unwrap(), &opts);
    print!("{}", report.table());
    Ok(())
}
