//! Hutchinson estimation of an effective dimension `tr(A (A + λI)^{-1})`, where each
//! probe is answered by the ridge black box.

use msp::apps::{hutchinson_trace, RidgeBlackBox};
use msp::harness::{gen_instance, InstanceSpec};
use msp::linalg::{effective_dimension, FnOperator};
use msp::GeneralSolveConfig;

fn main() -> msp::Result<()> {
    let inst = gen_instance(&InstanceSpec::k_large_general(300, 200, 10, 30.0, 2))?;
    let lambda = 4.0;
    let bb = RidgeBlackBox::new(&inst.a, &GeneralSolveConfig::new(32, lambda, 1e-8))?;
    // AᵀA (AᵀA + λI)^{-1} y = y - λ (AᵀA + λI)^{-1} y
    let op = FnOperator::new(bb.n(), |y: &[f64], out: &mut [f64]| {
        let z = bb.solve(y, 1e-8).expect("ridge solve");
        for ((o, yi), zi) in out.iter_mut().zip(y).zip(&z) {
            *o = yi - lambda * zi;
        }
    });
    let (est, stderr) = hutchinson_trace(&op, 40, 9)?;
    let exact = effective_dimension(&inst.spectrum.clone().unwrap().squared(), lambda)?;
    println!("estimate {est:.3} ± {stderr:.3}, exact {exact:.3}, black-box calls {}", bb.calls());
    Ok(())
}
