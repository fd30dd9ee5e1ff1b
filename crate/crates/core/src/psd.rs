//! Two-level solver for `(A + λI) x = b` with symmetric PSD `A`.
//!
//! Level 1 runs preconditioned Lanczos on `A + λI` with the Nyström preconditioner
//! `M`. Every application of `M^{-1}` is itself a level-2 Lanczos solve of the small
//! system `(CᵀC + λ̃W) y = Cᵀ r`, preconditioned by the exactly factored sketched
//! matrix `M₂ = (ΦC)ᵀ(ΦC) + λ̃W`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::MspConfig;
use crate::error::{MspError, Result};
use crate::lanczos::{preconditioned_lanczos, AdaptiveBudget, LanczosOptions, LanczosStatus, LanczosWorkspace};
use crate::linalg::vector::{ensure_finite, ensure_len, norm2, sub};
use crate::linalg::{default_power_iters, power_method_norm, Matrix, Shifted, Symmetry};
use crate::nystrom::{build_nystrom_psd, Lambda0Mode, NystromPreconditioner};
use crate::report::{SolveReport, SolveStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdSolveConfig {
    pub l: usize,
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub t_max_override: Option<usize>,
    pub inner_iters_override: Option<usize>,
    /// `None` uses the Hutchinson estimate with `tuning.lambda0_probes` probes.
    pub lambda0: Option<Lambda0Mode>,
    pub tuning: MspConfig,
}

impl PsdSolveConfig {
    pub fn new(l: usize, lambda: f64, eps: f64) -> Self {
        Self {
            l,
            lambda,
            eps,
            delta: 0.1,
            seed: 0,
            t_max_override: None,
            inner_iters_override: None,
            lambda0: None,
            tuning: MspConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(MspError::Domain(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(MspError::Domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(MspError::Domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        self.tuning.validate()
    }

    /// `l` clamped to `[ceil(log2 n) + 1, n - 1]`, and whether clamping happened.
    /// `None` when that range is empty.
    pub fn effective_l(&self, n: usize) -> Option<(usize, bool)> {
        clamp_rank(self.l, n)
    }

    pub(crate) fn lambda0_mode(&self) -> Lambda0Mode {
        self.lambda0.unwrap_or(Lambda0Mode::Hutchinson {
            probes: self.tuning.lambda0_probes,
        })
    }
}

pub(crate) fn clamp_rank(l: usize, n: usize) -> Option<(usize, bool)> {
    if n < 2 {
        return None;
    }
    let lo = (n as f64).log2().ceil() as usize + 1;
    let hi = n - 1;
    if lo > hi {
        return None;
    }
    let c = l.clamp(lo, hi);
    Some((c, c != l))
}

/// Accuracy and iteration cap for one inner solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerBudget {
    pub max_iters: usize,
    pub eps: f64,
    pub inflation: f64,
}

impl InnerBudget {
    /// `ceil(c * ln(kappa_bound / eps))` iterations for a system whose preconditioned
    /// condition number is at most `kappa_bound`.
    pub fn from_tolerance(eps: f64, kappa_bound: f64, cfg: &MspConfig) -> Self {
        let iters = (cfg.inner_budget_c * (kappa_bound.max(1.0) / eps).ln().max(1.0)).ceil() as usize;
        Self {
            max_iters: iters.max(1),
            eps,
            inflation: cfg.ritz_inflation,
        }
    }

    pub(crate) fn options(&self) -> LanczosOptions {
        LanczosOptions {
            max_iters: self.max_iters,
            tolerance: Some(self.eps),
            ritz_inflation: self.inflation,
            ..LanczosOptions::default()
        }
    }
}

/// Running totals over the inner solves of one outer run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerStats {
    pub calls: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    pub exhausted: usize,
    pub breakdowns: usize,
}

impl InnerStats {
    pub(crate) fn record(&mut self, iters: usize, status: LanczosStatus) {
        self.calls += 1;
        self.iterations += iters;
        self.max_iterations = self.max_iterations.max(iters);
        match status {
            LanczosStatus::BudgetExhausted => self.exhausted += 1,
            LanczosStatus::Breakdown => self.breakdowns += 1,
            _ => {}
        }
    }
}

/// Level-1 `SolveM`: approximates `M^{-1} r` through a level-2 Lanczos solve.
pub fn solve_m1_psd(
    p: &NystromPreconditioner,
    r: &[f64],
    budget: &InnerBudget,
    stats: &mut InnerStats,
) -> Result<Vec<f64>> {
    ensure_len(r, p.n(), "SolveM1 input")?;
    if let Some(d) = p.direct_factor() {
        stats.record(0, LanczosStatus::Converged);
        return Ok(d.solve(r));
    }
    let inner = p
        .inner_factor()
        .ok_or_else(|| MspError::Domain("preconditioner has no level-2 factor".into()))?;
    let op = p.level2_operator();
    let mut m2 = |v: &[f64]| Ok(inner.solve(v));
    let opts = budget.options();
    p.apply_minv_via_formula(r, &mut |g| {
        let (y, ws) = preconditioned_lanczos(&op, g, &mut m2, &opts)?;
        stats.record(ws.iterations(), ws.status);
        Ok(y)
    })
}

/// Inner tolerances `(ε₀, ε₁)` for a level-1 target `eps`.
pub fn inner_tolerances(eps: f64, kappa: f64, n: usize, floor: f64) -> (f64, f64) {
    let k = kappa.max(1.0);
    let eps0 = (eps / (k * n.max(1) as f64)).max(floor);
    let eps1 = (eps0 / k.powf(1.5)).max(floor);
    (eps0, eps1)
}

/// Solves `(A + λI) x = b`.
pub fn solve_psd(a: &Matrix, b: &[f64], cfg: &PsdSolveConfig) -> Result<SolveReport> {
    solve_psd_traced(a, b, cfg).map(|(r, _)| r)
}

/// [`solve_psd`] that also returns the level-1 Lanczos workspace, from which every
/// intermediate iterate can be rebuilt.
pub fn solve_psd_traced(
    a: &Matrix,
    b: &[f64],
    cfg: &PsdSolveConfig,
) -> Result<(SolveReport, Option<LanczosWorkspace>)> {
    let start = Instant::now();
    let solver = PsdSolver::prepare(a, cfg)?;
    solver.solve_traced_since(b, cfg.eps, start)
}

enum PsdKind {
    Dense(crate::linalg::Cholesky),
    Msp { p: NystromPreconditioner, kappa_hat: f64 },
}

/// Preconditioner and spectral estimates for a fixed `(A, λ)`, reusable across
/// right-hand sides and accuracies.
pub struct PsdSolver<'a> {
    a: &'a Matrix,
    cfg: PsdSolveConfig,
    kind: PsdKind,
    setup_matvecs: usize,
    flags: Vec<String>,
}

impl<'a> PsdSolver<'a> {
    pub fn prepare(a: &'a Matrix, cfg: &PsdSolveConfig) -> Result<Self> {
        cfg.validate()?;
        let n = a.rows();
        if a.symmetry() != Symmetry::SymmetricPsd {
            return Err(MspError::Domain("msp-psd needs a matrix declared symmetric PSD".into()));
        }
        let Some((l, clamped)) = cfg.effective_l(n) else {
            let mut m = a.to_dense();
            m.symmetrize();
            m.add_diag(cfg.lambda);
            let (chol, _) = crate::nystrom::factor_with_jitter(&m, &cfg.tuning)?;
            return Ok(Self {
                a,
                cfg: cfg.clone(),
                kind: PsdKind::Dense(chol),
                setup_matvecs: n,
                flags: vec!["dense-fallback-small-n".into()],
            });
        };
        let mut flags = Vec::new();
        if clamped {
            flags.push("l-clamped".to_string());
        }
        let p = build_nystrom_psd(a, l, cfg.lambda, cfg.delta, cfg.seed, cfg.lambda0_mode(), &cfg.tuning)?;
        if p.is_saturated() {
            flags.push("saturated-sketch".into());
        }
        if p.jitter() > cfg.tuning.jitter_start * p.w().trace() / p.s() as f64 * 1.5 {
            flags.push("jitter-escalated".into());
        }
        let mut setup_matvecs = match cfg.lambda0_mode() {
            Lambda0Mode::Hutchinson { probes } => probes,
            _ => 0,
        };
        let power_iters = default_power_iters(n);
        let a_norm = power_method_norm(a, power_iters, cfg.seed);
        setup_matvecs += power_iters + 1;
        let kappa_hat = (a_norm + cfg.lambda) / p.lambda_tilde();
        Ok(Self { a, cfg: cfg.clone(), kind: PsdKind::Msp { p, kappa_hat }, setup_matvecs, flags })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn preconditioner(&self) -> Option<&NystromPreconditioner> {
        match &self.kind {
            PsdKind::Msp { p, .. } => Some(p),
            PsdKind::Dense(_) => None,
        }
    }

    pub fn kappa_hat(&self) -> Option<f64> {
        match &self.kind {
            PsdKind::Msp { kappa_hat, .. } => Some(*kappa_hat),
            PsdKind::Dense(_) => None,
        }
    }

    /// Setup cost is charged to every report.
    pub fn solve(&self, b: &[f64], eps: f64) -> Result<SolveReport> {
        self.solve_traced_since(b, eps, Instant::now()).map(|(r, _)| r)
    }

    fn solve_traced_since(
        &self,
        b: &[f64],
        eps: f64,
        start: Instant,
    ) -> Result<(SolveReport, Option<LanczosWorkspace>)> {
        let n = self.n();
        let cfg = &self.cfg;
        ensure_len(b, n, "right-hand side")?;
        ensure_finite(b, "right-hand side")?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(MspError::Domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        let mut report = SolveReport::new("msp-psd", n);
        let mut used = cfg.clone();
        used.eps = eps;
        report.config = serde_json::to_value(&used).unwrap_or_default();
        for f in &self.flags {
            report.flag(f.clone());
        }
        report.matvecs = self.setup_matvecs;
        let sys = Shifted { inner: self.a, shift: cfg.lambda };
        let (p, kappa_hat) = match &self.kind {
            PsdKind::Dense(chol) => return Ok((finish(report, &sys, b, chol.solve(b), start), None)),
            PsdKind::Msp { p, kappa_hat } => (p, *kappa_hat),
        };
        let (_, eps1) = inner_tolerances(eps, kappa_hat, n, cfg.tuning.inner_eps_floor);
        let mut budget = InnerBudget::from_tolerance(eps1, 9.0, &cfg.tuning);
        if let Some(it) = cfg.inner_iters_override {
            budget.max_iters = it.max(1);
        }

        let opts = level1_options(eps, cfg.t_max_override, &cfg.tuning);
        let mut stats = InnerStats::default();
        let mut solve_m = |r: &[f64]| solve_m1_psd(p, r, &budget, &mut stats);
        let (x, ws) = preconditioned_lanczos(&sys, b, &mut solve_m, &opts)?;

        report.status = SolveStatus::from(ws.status);
        report.binding_bound = binding_bound(&ws, &opts);
        report.iterations.level1 = ws.iterations();
        report.iterations.level2_total = stats.iterations;
        if stats.exhausted > 0 {
            report.flag("inner-budget-exhausted");
        }
        if stats.breakdowns > 0 {
            report.flag("inner-breakdown");
        }
        report.matvecs += ws.op_applies;
        report.residual_history = ws.residual_history.clone();
        report.kappa_m_estimate = ws.kappa_estimate();
        report.preconditioner = Some(p.diagnostics(ws.kappa_estimate()));
        Ok((finish(report, &sys, b, x, start), Some(ws)))
    }
}

pub(crate) fn level1_options(eps: f64, t_max: Option<usize>, tuning: &MspConfig) -> LanczosOptions {
    LanczosOptions {
        max_iters: t_max.unwrap_or(tuning.max_outer_iters).max(1),
        tolerance: Some(eps),
        residual_target: None,
        check_every: tuning.check_every,
        adaptive_budget: t_max.is_none().then_some(AdaptiveBudget {
            warmup: tuning.warmup_iters,
            c: tuning.budget_c,
            eps,
            inflation: tuning.ritz_inflation,
        }),
        ritz_inflation: tuning.ritz_inflation,
        trace: false,
        keep_under: false,
    }
}

pub(crate) fn binding_bound(ws: &crate::lanczos::LanczosWorkspace, opts: &LanczosOptions) -> String {
    match ws.status {
        LanczosStatus::Converged | LanczosStatus::Running => "tolerance",
        LanczosStatus::Breakdown => "breakdown",
        LanczosStatus::BudgetExhausted if ws.budget >= opts.max_iters => "hard-cap",
        LanczosStatus::BudgetExhausted => "budget",
    }
    .into()
}

pub(crate) fn finish<A: crate::linalg::LinearOperator + ?Sized>(
    mut report: SolveReport,
    sys: &A,
    b: &[f64],
    x: Vec<f64>,
    start: Instant,
) -> SolveReport {
    let bn = norm2(b);
    report.final_residual = if bn == 0.0 {
        norm2(&sys.apply(&x))
    } else {
        norm2(&sub(&sys.apply(&x), b)) / bn
    };
    report.matvecs += 1;
    report.x = x;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn clamp_range() {
        assert_eq!(clamp_rank(64, 512), Some((64, false)));
        assert_eq!(clamp_rank(2, 512), Some((10, true)));
        assert_eq!(clamp_rank(600, 512), Some((511, true)));
        assert_eq!(clamp_rank(1, 2), None);
    }

    #[test]
    fn identity_two_iterations() {
        let n = 64;
        let a = Matrix::dense(DenseMatrix::identity(n)).into_symmetric_psd().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let rep = solve_psd(&a, &b, &PsdSolveConfig::new(8, 0.0, 1e-12)).unwrap();
        assert!(rep.converged());
        assert!(rep.iterations.level1 <= 2, "{} {:?} {}", rep.iterations.level1, rep.status, rep.final_residual);
        assert!(norm2(&sub(&rep.x, &b)) <= 1e-12 * norm2(&b));
    }

    #[test]
    fn heavy_regularization_is_fast() {
        let n = 50;
        let d: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let a = Matrix::dense(DenseMatrix::from_diag(&d)).into_symmetric_psd().unwrap();
        let b = vec![1.0; n];
        let rep = solve_psd(&a, &b, &PsdSolveConfig::new(8, 100.0 * n as f64, 1e-8)).unwrap();
        assert!(rep.iterations.level1 <= 3);
        assert!(rep.final_residual < 1e-8);
    }

    #[test]
    fn inner_tolerances_floor() {
        let (e0, e1) = inner_tolerances(1e-8, 1e6, 1000, 1e-14);
        assert_eq!(e0, 1e-14);
        assert_eq!(e1, 1e-14);
        let (e0, e1) = inner_tolerances(0.1, 1.0, 10, 1e-14);
        assert!((e0 - 0.01).abs() < 1e-15 && (e1 - 0.01).abs() < 1e-15);
    }
}
