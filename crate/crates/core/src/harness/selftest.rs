use serde::{Deserialize, Serialize};

use crate::apps::hutchinson_trace;
use crate::general::{solve_normal, solve_square, GeneralSolveConfig};
use crate::lanczos::{preconditioned_lanczos, symmetric_lanczos_reference, LanczosOptions};
use crate::linalg::vector::{norm2, sub};
use crate::linalg::{dense_factor_solve, effective_dimension, norm_in, DenseMatrix, LinearOperator, Matrix, Shifted, SpectrumSummary};
use crate::nystrom::{build_nystrom_psd, Lambda0Mode};
use crate::psd::{solve_psd, PsdSolveConfig};
use crate::sketch::make_sparse_embedding;

use super::instances::{gen_instance, InstanceSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> crate::error::Result<(bool, String)>) -> SelftestCheck {
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    SelftestCheck { name: name.into(), passed, detail }
}

fn rel_err_in<B: LinearOperator + ?Sized>(b: &B, x: &[f64], exact: &[f64]) -> crate::error::Result<f64> {
    Ok(norm_in(b, &sub(x, exact))? / norm_in(b, exact)?)
}

/// Fast invariant checks covering every module. Deterministic given `seed`.
pub fn run_selftest(seed: u64) -> Vec<SelftestCheck> {
    vec![
        check("sketch-column-norms", || {
            let s = make_sparse_embedding(64, 500, 4, seed)?;
            let worst = (0..500)
                .map(|j| (s.column(j).map(|(_, v)| v * v).sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max);
            Ok((worst < 1e-12, format!("max |col norm^2 - 1| = {worst:.2e}")))
        }),
        check("effective-dimension-monotone", || {
            let spec = SpectrumSummary::psd_eigenvalues((1..=50).map(|i| 100.0 / i as f64).collect())?;
            let mut prev = f64::INFINITY;
            let mut ok = true;
            for lam in [0.01, 0.1, 1.0, 10.0, 100.0] {
                let d = effective_dimension(&spec, lam)?;
                ok &= d < prev;
                prev = d;
            }
            Ok((ok, "d_lambda strictly decreasing on a 5-point grid".into()))
        }),
        check("hutchinson-identity", || {
            let a = Matrix::dense(DenseMatrix::identity(33));
            let (est, _) = hutchinson_trace(&a, 4, seed)?;
            Ok((est == 33.0, format!("estimate {est}")))
        }),
        check("lanczos-reference", || {
            let n = 60;
            let inst = gen_instance(&InstanceSpec::k_large_psd(n, 3, 50.0, seed))?;
            let a = inst.a.to_dense();
            let d: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64).collect();
            let m_inv_half = DenseMatrix::from_diag(&d.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
            let t = 6;
            let (x, _) = preconditioned_lanczos(
                &inst.a,
                &inst.b,
                &mut |r: &[f64]| Ok(r.iter().zip(&d).map(|(a, b)| a / b).collect()),
                &LanczosOptions::fixed(t),
            )?;
            let r = symmetric_lanczos_reference(&a, &inst.b, &m_inv_half, t)?;
            let err = rel_err_in(&inst.a, &x, &r)?;
            Ok((err <= 1e-8, format!("relative A-norm gap {err:.2e}")))
        }),
        check("nystrom-formula", || {
            let inst = gen_instance(&InstanceSpec::k_large_psd(300, 6, 1e3, seed))?;
            let p = build_nystrom_psd(&inst.a, 24, 0.5, 0.1, seed, Lambda0Mode::Hutchinson { probes: 10 }, &Default::default())?;
            let m = Matrix::dense(p.dense_m());
            let want = dense_factor_solve(&m, &inst.b)?;
            let factor = p.inner_factor().expect("unsaturated");
            let got = p.apply_minv_via_formula(&inst.b, &mut |g| Ok(factor.solve(g)))?;
            let err = norm2(&sub(&got, &want)) / norm2(&want);
            Ok((err < 1e-6, format!("relative error {err:.2e}")))
        }),
        check("msp-psd-oracle", || {
            let inst = gen_instance(&InstanceSpec::k_large_psd(256, 8, 1e4, seed))?;
            let lam = 1e-3;
            let rep = solve_psd(&inst.a, &inst.b, &PsdSolveConfig::new(32, lam, 1e-8).with_seed(seed))?;
            let sys = Shifted { inner: &inst.a, shift: lam };
            let mut k = inst.a.to_dense();
            k.add_diag(lam);
            let exact = dense_factor_solve(&Matrix::dense(k), &inst.b)?;
            let err = rel_err_in(&sys, &rep.x, &exact)?;
            Ok((rep.converged() && err <= 1e-8, format!("{} iterations, error {err:.2e}", rep.iterations.level1)))
        }),
        check("msp-general-oracle", || {
            let mut spec = InstanceSpec::k_large_general(220, 160, 6, 1e2, seed);
            spec.tail = (1.0, 2.0);
            let inst = gen_instance(&spec)?;
            let lam = 1e-2;
            let c = inst.a.apply_transpose(&inst.b);
            let rep = solve_normal(&inst.a, &c, &GeneralSolveConfig::new(16, lam, 1e-8).with_seed(seed))?;
            let mut k = inst.a.to_dense().gram();
            k.add_diag(lam);
            let km = Matrix::dense(k);
            let exact = dense_factor_solve(&km, &c)?;
            let err = rel_err_in(&km, &rep.x, &exact)?;
            Ok((rep.converged() && err <= 1e-8, format!("{} iterations, error {err:.2e}", rep.iterations.level1)))
        }),
        check("hidden-rotation", || {
            let n = 200;
            let inst = gen_instance(&InstanceSpec::hidden_rotation(n, 17, 123))?;
            let rep = solve_square(&inst.a, &inst.b, &GeneralSolveConfig::new(16, 0.0, 1e-10).with_seed(seed))?;
            let zeros: Vec<usize> = (0..n).filter(|&i| rep.x[i].abs() < 0.5).collect();
            let exact = inst.x_true.as_ref().expect("known solution");
            let err = norm2(&sub(&rep.x, exact)) / norm2(exact);
            Ok((zeros == vec![17] && err < 1e-8, format!("zero entries {zeros:?}, error {err:.2e}")))
        }),
    ]
}
