use serde::{Deserialize, Serialize};

use crate::config::MspConfig;
use crate::error::{MspError, Result};
use crate::general::{GeneralSolveConfig, NormalSolver};
use crate::linalg::vector::{axpy, dot, ensure_finite, ensure_len, norm2, sub};
use crate::linalg::{LinearOperator, Matrix};
use crate::report::{SolveReport, SolveStatus};
use crate::rng::{derive_seed, streams};
use crate::sketch::{make_ose_with, sketch_apply_left};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresConfig {
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// Nyström rank for the inner msp-general solver on the row sketch.
    pub l: usize,
    pub inner_eps: f64,
    /// Defaults to `8 * ceil(log2(1/eps))`.
    pub outer_budget: Option<usize>,
    pub tuning: MspConfig,
}

impl LeastSquaresConfig {
    pub fn new(eps: f64, l: usize) -> Self {
        Self { eps, delta: 0.1, seed: 0, l, inner_eps: 0.25, outer_budget: None, tuning: MspConfig::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn budget(&self) -> usize {
        self.outer_budget.unwrap_or_else(|| 8 * (1.0 / self.eps).log2().ceil().max(1.0) as usize)
    }
}

/// Minimizes `|Ax - b|` for tall `A` by sketch-and-precondition refinement.
///
/// The row sketch `Ā = ΨA` is solved against with msp-general once per step; the
/// step length along each correction minimizes the true residual. `final_residual`
/// holds `|Aᵀ(b - Ax)| / |Aᵀb|`.
pub fn solve_least_squares(a: &Matrix, b: &[f64], cfg: &LeastSquaresConfig) -> Result<SolveReport> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(MspError::Domain(format!("least squares needs a tall matrix, got {m}x{n}")));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(MspError::Domain(format!("eps must lie in (0, 1), got {}", cfg.eps)));
    }
    ensure_len(b, m, "right-hand side")?;
    ensure_finite(b, "right-hand side")?;
    let start = std::time::Instant::now();
    let mut report = SolveReport::new("least-squares", n);
    let g0 = a.apply_transpose(b);
    let g0n = norm2(&g0);
    let mut x = vec![0.0; n];
    if g0n == 0.0 {
        report.matvecs = 1;
        report.config = serde_json::json!({ "least_squares": cfg, "outer_steps": 0 });
        return Ok(report);
    }

    let ose = make_ose_with(m, n, cfg.delta.min(0.49), 0.5, cfg.tuning.ose_c, derive_seed(cfg.seed, streams::OSE))?;
    let sketched;
    let a_bar = if ose.is_identity() {
        a
    } else {
        sketched = Matrix::dense(sketch_apply_left(ose.embedding(), a)?);
        &sketched
    };
    let mut inner_cfg = GeneralSolveConfig::new(cfg.l, 0.0, cfg.inner_eps).with_seed(cfg.seed);
    inner_cfg.delta = cfg.delta;
    inner_cfg.tuning = cfg.tuning.clone();
    let solver = NormalSolver::prepare(a_bar, &inner_cfg)?;

    let budget = cfg.budget();
    let mut r = b.to_vec();
    let mut gnorm = g0n;
    let mut steps = 0;
    let mut inner_iters = 0;
    let mut inner_products = 0;
    let mut matvecs = 1;
    while gnorm > cfg.eps * g0n && steps < budget {
        let g = a.apply_transpose(&r);
        let inner = solver.solve(&g, cfg.inner_eps)?;
        inner_iters += inner.iterations.level1;
        inner_products += inner.matvecs;
        for f in &inner.flags {
            if f != "dense-fallback-small-n" && f != "l-clamped" {
                report.flag(format!("inner-{f}"));
            }
        }
        let az = a.apply(&inner.x);
        let denom = dot(&az, &az);
        if denom == 0.0 {
            break;
        }
        let alpha = dot(&r, &az) / denom;
        axpy(alpha, &inner.x, &mut x);
        r = sub(b, &a.apply(&x));
        gnorm = norm2(&a.apply_transpose(&r));
        matvecs += 4;
        steps += 1;
        report.residual_history.push(crate::lanczos::Checkpoint {
            iter: steps,
            residual: gnorm / g0n,
        });
    }
    if gnorm > cfg.eps * g0n {
        report.status = SolveStatus::BudgetExhausted;
        report.binding_bound = "budget".into();
        report.flag("outer-budget-exhausted");
    }
    report.iterations.level1 = steps;
    report.iterations.level2_total = inner_iters;
    report.matvecs = matvecs;
    report.final_residual = gnorm / g0n;
    report.x = x;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    report.config = serde_json::json!({
        "least_squares": cfg,
        "outer_steps": steps,
        "outer_budget": budget,
        "sketch_rows": ose.rows(),
        "inner_products": inner_products,
        "objective": dot(&r, &r),
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn orthogonal_rhs_gives_zero() {
        let mut a = DenseMatrix::zeros(6, 2);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        let b = [0.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        let rep = solve_least_squares(&Matrix::dense(a), &b, &LeastSquaresConfig::new(1e-8, 1)).unwrap();
        assert!(rep.x.iter().all(|v| *v == 0.0));
        assert_eq!(rep.iterations.level1, 0);
    }

    #[test]
    fn wide_rejected() {
        let a = Matrix::dense(DenseMatrix::zeros(2, 3));
        assert!(solve_least_squares(&a, &[1.0, 1.0], &LeastSquaresConfig::new(1e-6, 1)).is_err());
    }
}
