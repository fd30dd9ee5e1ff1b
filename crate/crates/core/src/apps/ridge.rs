use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::Result;
use crate::general::{GeneralSolveConfig, NormalSolver};
use crate::linalg::vector::ensure_len;
use crate::linalg::Matrix;

/// Approximate `(AᵀA + λI)^{-1}` bound to one `(A, λ)`: each call returns `x` with
/// `|x - M⁻¹y|_M ≤ ε |y|_{M⁻¹}`.
pub struct RidgeBlackBox<'a> {
    solver: NormalSolver<'a>,
    calls: AtomicUsize,
}

impl<'a> RidgeBlackBox<'a> {
    /// `cfg.eps` is ignored; the accuracy is chosen per call.
    pub fn new(a: &'a Matrix, cfg: &GeneralSolveConfig) -> Result<Self> {
        Ok(Self { solver: NormalSolver::prepare(a, cfg)?, calls: AtomicUsize::new(0) })
    }

    pub fn lambda(&self) -> f64 {
        self.solver.lambda()
    }

    pub fn n(&self) -> usize {
        self.solver.n()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn solve(&self, y: &[f64], eps: f64) -> Result<Vec<f64>> {
        ensure_len(y, self.n(), "black-box input")?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        if y.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; y.len()]);
        }
        Ok(self.solver.solve(y, eps)?.x)
    }
}

pub fn ridge_blackbox_solve(bb: &RidgeBlackBox<'_>, y: &[f64], eps: f64) -> Result<Vec<f64>> {
    bb.solve(y, eps)
}
