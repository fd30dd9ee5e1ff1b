//! Three-level solver for `(AᵀA + λI) x = c` with a general `m x n` matrix `A`.
//!
//! The Nyström preconditioner of `AᵀA` is built from `Ã = A Sᵀ` without ever
//! forming `AᵀA`: `C = AᵀÃ` and `W = ÃᵀÃ`. Applying `M^{-1}` needs the level-2
//! system `(CᵀC + λ̃W) y = Cᵀ r`, which is preconditioned by
//! `M₂ = W² + λ̃W`. Its inverse splits as
//!
//! ```text
//! M₂^{-1} = ((ÃᵀÃ)^{-1} - (ÃᵀÃ + λ̃I)^{-1}) / λ̃
//! ```
//!
//! and the two level-3 systems are solved by Lanczos preconditioned with exact
//! factorizations of `ÂᵀÂ` and `ÂᵀÂ + λ̃I`, where `Â = ΦÃ`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::MspConfig;
use crate::error::{MspError, Result};
use crate::lanczos::{preconditioned_lanczos, LanczosWorkspace};
use crate::linalg::vector::{dot, ensure_finite, ensure_len, norm2, sub};
use crate::linalg::{default_power_iters, power_method_norm, Cholesky, DenseMatrix, FnOperator, LinearOperator, Matrix, Shifted};
use crate::nystrom::{factor_with_jitter, Lambda0Mode};
use crate::psd::{binding_bound, clamp_rank, finish, inner_tolerances, level1_options, solve_psd, InnerBudget, InnerStats, PsdSolveConfig};
use crate::report::{SolveReport, SolveStatus};
use crate::rng::{rademacher_vec, stream_rng, streams};
use crate::sketch::{make_ose_with, make_sparse_embedding, sketch_apply_right, SketchDescriptor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralSolveConfig {
    pub l: usize,
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub t_max_override: Option<usize>,
    pub level2_iters_override: Option<usize>,
    pub level3_iters_override: Option<usize>,
    pub lambda0: Option<Lambda0Mode>,
    /// The input already is `AᵀA`; solve it with the two-level PSD method.
    pub given_gram: bool,
    pub tuning: MspConfig,
}

impl GeneralSolveConfig {
    pub fn new(l: usize, lambda: f64, eps: f64) -> Self {
        Self {
            l,
            lambda,
            eps,
            delta: 0.1,
            seed: 0,
            t_max_override: None,
            level2_iters_override: None,
            level3_iters_override: None,
            lambda0: None,
            given_gram: false,
            tuning: MspConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn as_psd(&self) -> PsdSolveConfig {
        PsdSolveConfig {
            l: self.l,
            lambda: self.lambda,
            eps: self.eps,
            delta: self.delta,
            seed: self.seed,
            t_max_override: self.t_max_override,
            inner_iters_override: self.level2_iters_override,
            lambda0: self.lambda0,
            tuning: self.tuning.clone(),
        }
    }

    fn lambda0_mode(&self) -> Lambda0Mode {
        self.lambda0.unwrap_or(Lambda0Mode::Hutchinson {
            probes: self.tuning.lambda0_probes,
        })
    }
}

/// Everything `build_general` precomputes for one `(A, λ)` pair.
#[derive(Debug)]
pub struct GeneralMspState<'a> {
    a: &'a Matrix,
    a_tilde: DenseMatrix,
    a_hat: Option<DenseMatrix>,
    /// `ÃᵀÃ` plus jitter.
    w: DenseMatrix,
    w_factor: Cholesky,
    m3a: Option<Cholesky>,
    m3b: Option<Cholesky>,
    direct: Option<Cholesky>,
    lambda: f64,
    lambda0: f64,
    lambda_tilde: f64,
    jitter: f64,
    phi: usize,
    sketch: SketchDescriptor,
    products: AtomicUsize,
}

/// Iteration caps and tolerances for the inner levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralBudgets {
    pub level2: InnerBudget,
    pub level3: InnerBudget,
}

/// Per-level totals over one outer solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralStats {
    pub level2: InnerStats,
    pub level3a: InnerStats,
    pub level3b: InnerStats,
}

impl<'a> GeneralMspState<'a> {
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn s(&self) -> usize {
        self.a_tilde.cols()
    }

    pub fn a(&self) -> &Matrix {
        self.a
    }

    pub fn a_tilde(&self) -> &DenseMatrix {
        &self.a_tilde
    }

    pub fn a_hat(&self) -> Option<&DenseMatrix> {
        self.a_hat.as_ref()
    }

    /// `ÃᵀÃ` including the jitter.
    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn w_factor(&self) -> &Cholesky {
        &self.w_factor
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_tilde
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn phi(&self) -> usize {
        self.phi
    }

    pub fn sketch(&self) -> SketchDescriptor {
        self.sketch
    }

    pub fn is_saturated(&self) -> bool {
        self.direct.is_some()
    }

    pub fn m3a_factor(&self) -> Option<&Cholesky> {
        self.m3a.as_ref()
    }

    pub fn m3b_factor(&self) -> Option<&Cholesky> {
        self.m3b.as_ref()
    }

    /// Products with `A` or `Aᵀ` issued through this state so far.
    pub fn products(&self) -> usize {
        self.products.load(Ordering::Relaxed)
    }

    fn a_apply(&self, x: &[f64]) -> Vec<f64> {
        self.products.fetch_add(1, Ordering::Relaxed);
        self.a.apply(x)
    }

    fn at_apply(&self, y: &[f64]) -> Vec<f64> {
        self.products.fetch_add(1, Ordering::Relaxed);
        self.a.apply_transpose(y)
    }

    /// `Cᵀ r = Ãᵀ (A r)`.
    pub fn c_transpose(&self, r: &[f64]) -> Vec<f64> {
        self.a_tilde.matvec_t(&self.a_apply(r))
    }

    /// `C y = Aᵀ (Ã y)`.
    pub fn c_apply(&self, y: &[f64]) -> Vec<f64> {
        self.at_apply(&self.a_tilde.matvec(y))
    }

    /// `y ↦ Ãᵀ(A(Aᵀ(Ã y))) + λ̃ Ãᵀ(Ã y)`, evaluated right to left.
    pub fn level2_operator(&self) -> impl LinearOperator + '_ {
        FnOperator::new(self.s(), move |y: &[f64], out: &mut [f64]| {
            let ay = self.a_tilde.matvec(y);
            let cy = self.at_apply(&ay);
            let acy = self.a_apply(&cy);
            self.a_tilde.matvec_t_into(&acy, out);
            let wy = self.a_tilde.matvec_t(&ay);
            crate::linalg::vector::axpy(self.lambda_tilde, &wy, out);
        })
    }

    /// Dense `C = AᵀÃ` (tests and diagnostics only).
    pub fn c_dense(&self) -> DenseMatrix {
        let n = self.n();
        let s = self.s();
        let mut c = DenseMatrix::zeros(n, s);
        for j in 0..s {
            c.set_column(j, &self.a.apply_transpose(&self.a_tilde.column(j)));
        }
        c
    }

    /// Dense `M = C W^{-1} Cᵀ + λ̃ I`, using the unjittered `W = ÃᵀÃ` when it factors.
    pub fn dense_m(&self) -> Result<DenseMatrix> {
        let c = self.c_dense();
        let exact = Cholesky::new(&self.a_tilde.gram()).ok();
        let chol = exact.as_ref().unwrap_or(&self.w_factor);
        let mut winv_ct = DenseMatrix::zeros(self.s(), self.n());
        for i in 0..self.n() {
            winv_ct.set_column(i, &chol.solve(c.row(i)));
        }
        let mut m = c.matmul(&winv_ct)?;
        m.symmetrize();
        m.add_diag(self.lambda_tilde);
        Ok(m)
    }
}

/// Builds `Ã`, `Â`, the cached level-3 factors and `λ̃` for `(AᵀA + λI)`.
pub fn build_general<'a>(
    a: &'a Matrix,
    l: usize,
    lambda: f64,
    delta: f64,
    seed: u64,
    lambda0: Lambda0Mode,
    cfg: &MspConfig,
) -> Result<GeneralMspState<'a>> {
    let n = a.cols();
    let m = a.rows();
    if l == 0 || l >= n {
        return Err(MspError::Domain(format!("need 0 < l < n (l={l}, n={n})")));
    }
    if !(lambda >= 0.0) {
        return Err(MspError::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let s = cfg.sketch_rows(n, l, delta);
    let gamma = cfg.sketch_gamma(l, delta).min(s);
    let sk = make_sparse_embedding(s, n, gamma, seed)?;
    let a_tilde = sketch_apply_right(a, &sk)?;
    let mut w = a_tilde.gram();
    w.symmetrize();
    let (w_factor, jitter) = factor_with_jitter(&w, cfg)?;
    w.add_diag(jitter);

    let frob = a.frobenius_sq();
    let mut products = 0;
    let lambda0 = match lambda0 {
        Lambda0Mode::Fixed(v) => v,
        Lambda0Mode::TailSum(t) => 2.0 / l as f64 * t,
        Lambda0Mode::Hutchinson { probes } if s >= n => {
            if probes == 0 {
                return Err(MspError::Domain("lambda_0 estimation needs at least one probe".into()));
            }
            2.0 / l as f64 * 1e-12 * frob
        }
        Lambda0Mode::Hutchinson { probes } => {
            if probes == 0 {
                return Err(MspError::Domain("lambda_0 estimation needs at least one probe".into()));
            }
            let mut rng = stream_rng(seed, streams::PROBE);
            let mut tail = 0.0;
            for _ in 0..probes {
                let z = rademacher_vec(&mut rng, n);
                let az = a.apply(&z);
                let lz = w_factor.forward(&a_tilde.matvec_t(&az));
                tail += dot(&az, &az) - dot(&lz, &lz);
            }
            products += probes;
            let est = tail / probes as f64;
            if est < -0.1 * frob {
                return Err(MspError::InconsistentEstimate { estimate: est, trace: frob });
            }
            2.0 / l as f64 * est.max(1e-12 * frob)
        }
    };
    if !(lambda0 >= 0.0) {
        return Err(MspError::Domain(format!("lambda_0 must be nonnegative, got {lambda0}")));
    }
    let lambda_tilde = lambda + lambda0;
    if !(lambda_tilde > 0.0) {
        return Err(MspError::Domain("regularized shift lambda + lambda_0 must be positive".into()));
    }

    let (a_hat, m3a, m3b, direct, phi) = if s >= n {
        // Saturated sketch: M = AᵀA + λ̃I exactly.
        let ad = a.to_dense();
        let mut g = ad.gram();
        g.symmetrize();
        g.add_diag(lambda_tilde);
        let (chol, _) = factor_with_jitter(&g, cfg)?;
        (None, None, None, Some(chol), 0)
    } else {
        let ose = make_ose_with(m, s.min(m), delta.min(0.49), cfg.ose_eps, cfg.ose_c, seed)?;
        let a_hat = ose.apply_dense(&a_tilde)?;
        let mut g = a_hat.gram();
        g.symmetrize();
        let (m3a, _) = factor_with_jitter(&g, cfg)?;
        g.add_diag(lambda_tilde);
        let m3b = Cholesky::new(&g)?;
        (Some(a_hat), Some(m3a), Some(m3b), None, ose.rows())
    };

    Ok(GeneralMspState {
        a,
        a_tilde,
        a_hat,
        w,
        w_factor,
        m3a,
        m3b,
        direct,
        lambda,
        lambda0,
        lambda_tilde,
        jitter,
        phi,
        sketch: sk.descriptor(),
        products: AtomicUsize::new(products),
    })
}

/// Level-2 `SolveM`: `ẑ = (û - v̂) / λ̃` with `û ≈ W^{-1} r` and `v̂ ≈ (W + λ̃I)^{-1} r`.
pub fn solve_m2(state: &GeneralMspState<'_>, r: &[f64], budget: &InnerBudget, stats: &mut GeneralStats) -> Result<Vec<f64>> {
    ensure_len(r, state.s(), "SolveM2 input")?;
    let (m3a, m3b) = match (&state.m3a, &state.m3b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(MspError::Domain("state has no level-3 factors".into())),
    };
    let opts = budget.options();
    let w_op = &state.w;
    let wl_op = Shifted { inner: &state.w, shift: state.lambda_tilde };
    let (ra, rb) = rayon::join(
        || preconditioned_lanczos(w_op, r, &mut |v: &[f64]| Ok(m3a.solve(v)), &opts),
        || preconditioned_lanczos(&wl_op, r, &mut |v: &[f64]| Ok(m3b.solve(v)), &opts),
    );
    let (u, wsa) = ra?;
    let (v, wsb) = rb?;
    stats.level3a.record(wsa.iterations(), wsa.status);
    stats.level3b.record(wsb.iterations(), wsb.status);
    Ok(u.iter().zip(&v).map(|(ui, vi)| (ui - vi) / state.lambda_tilde).collect())
}

/// Level-1 `SolveM`: `ŵ = (r - C ŷ) / λ̃` where `ŷ` solves the level-2 system.
pub fn solve_m1_general(
    state: &GeneralMspState<'_>,
    r: &[f64],
    budgets: &GeneralBudgets,
    stats: &mut GeneralStats,
) -> Result<Vec<f64>> {
    ensure_len(r, state.n(), "SolveM1 input")?;
    if let Some(d) = &state.direct {
        stats.level2.record(0, crate::lanczos::LanczosStatus::Converged);
        return Ok(d.solve(r));
    }
    let g = state.c_transpose(r);
    let op = state.level2_operator();
    let opts = budgets.level2.options();
    let mut level3 = GeneralStats::default();
    let (y, ws) = preconditioned_lanczos(
        &op,
        &g,
        &mut |v: &[f64]| solve_m2(state, v, &budgets.level3, &mut level3),
        &opts,
    )?;
    stats.level2.record(ws.iterations(), ws.status);
    merge(&mut stats.level3a, &level3.level3a);
    merge(&mut stats.level3b, &level3.level3b);
    let cy = state.c_apply(&y);
    Ok(r.iter().zip(&cy).map(|(ri, ci)| (ri - ci) / state.lambda_tilde).collect())
}

fn merge(into: &mut InnerStats, from: &InnerStats) {
    into.calls += from.calls;
    into.iterations += from.iterations;
    into.max_iterations = into.max_iterations.max(from.max_iterations);
    into.exhausted += from.exhausted;
    into.breakdowns += from.breakdowns;
}

/// Default inner budgets: level-2 tolerance `ε₁` as in the PSD solver, level-3
/// tolerance `ε₂ = ε₀ / (4 κ̂² l)`; all floored.
pub fn default_budgets(eps: f64, kappa: f64, n: usize, l: usize, cfg: &MspConfig) -> GeneralBudgets {
    let (eps0, eps1) = inner_tolerances(eps, kappa, n, cfg.inner_eps_floor);
    let k = kappa.max(1.0);
    let eps2 = (eps0 / (4.0 * k * k * l.max(1) as f64)).max(cfg.inner_eps_floor);
    GeneralBudgets {
        level2: InnerBudget::from_tolerance(eps1, 6.0, cfg),
        level3: InnerBudget::from_tolerance(eps2, 9.0, cfg),
    }
}

/// Solves `(AᵀA + λI) x = c`.
pub fn solve_normal(a: &Matrix, c: &[f64], cfg: &GeneralSolveConfig) -> Result<SolveReport> {
    solve_normal_traced(a, c, cfg).map(|(r, _)| r)
}

/// [`solve_normal`] that also returns the level-1 Lanczos workspace.
pub fn solve_normal_traced(
    a: &Matrix,
    c: &[f64],
    cfg: &GeneralSolveConfig,
) -> Result<(SolveReport, Option<LanczosWorkspace>)> {
    if cfg.given_gram {
        let mut rep = solve_psd(a, c, &cfg.as_psd())?;
        rep.method = "msp-general".into();
        rep.flag("given-gram");
        return Ok((rep, None));
    }
    let start = Instant::now();
    let solver = NormalSolver::prepare(a, cfg)?;
    solver.solve_traced_since(c, cfg.eps, start)
}

enum NormalKind<'a> {
    Dense(Cholesky),
    Msp {
        state: GeneralMspState<'a>,
        kappa_hat: f64,
        l: usize,
    },
}

/// Solver state for a fixed `(A, λ)` that can be reused across right-hand sides
/// and accuracies.
pub struct NormalSolver<'a> {
    a: &'a Matrix,
    cfg: GeneralSolveConfig,
    kind: NormalKind<'a>,
    setup_products: usize,
    flags: Vec<String>,
}

impl<'a> NormalSolver<'a> {
    pub fn prepare(a: &'a Matrix, cfg: &GeneralSolveConfig) -> Result<Self> {
        cfg.as_psd().validate()?;
        let n = a.cols();
        let mut flags = Vec::new();
        let Some((l, clamped)) = clamp_rank(cfg.l, n) else {
            let mut g = a.to_dense().gram();
            g.symmetrize();
            g.add_diag(cfg.lambda);
            let (chol, _) = factor_with_jitter(&g, &cfg.tuning)?;
            return Ok(Self {
                a,
                cfg: cfg.clone(),
                kind: NormalKind::Dense(chol),
                setup_products: n,
                flags: vec!["dense-fallback-small-n".into()],
            });
        };
        if clamped {
            flags.push("l-clamped".into());
        }
        let state = build_general(a, l, cfg.lambda, cfg.delta, cfg.seed, cfg.lambda0_mode(), &cfg.tuning)?;
        if state.is_saturated() {
            flags.push("saturated-sketch".into());
        }
        let power_iters = default_power_iters(n);
        let gram = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
            let ax = a.apply(x);
            a.apply_transpose_into(&ax, y);
        });
        let gram_norm = power_method_norm(&gram, power_iters, cfg.seed);
        let kappa_hat = (gram_norm + cfg.lambda) / state.lambda_tilde();
        let setup_products = state.products() + 2 * (power_iters + 1);
        Ok(Self {
            a,
            cfg: cfg.clone(),
            kind: NormalKind::Msp { state, kappa_hat, l },
            setup_products,
            flags,
        })
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn lambda(&self) -> f64 {
        self.cfg.lambda
    }

    pub fn state(&self) -> Option<&GeneralMspState<'a>> {
        match &self.kind {
            NormalKind::Msp { state, .. } => Some(state),
            NormalKind::Dense(_) => None,
        }
    }

    pub fn kappa_hat(&self) -> Option<f64> {
        match &self.kind {
            NormalKind::Msp { kappa_hat, .. } => Some(*kappa_hat),
            NormalKind::Dense(_) => None,
        }
    }

    /// `x ↦ AᵀA x + λ x`.
    pub fn system(&self) -> impl LinearOperator + '_ {
        FnOperator::new(self.n(), move |x: &[f64], y: &mut [f64]| {
            let ax = self.a.apply(x);
            self.a.apply_transpose_into(&ax, y);
            crate::linalg::vector::axpy(self.cfg.lambda, x, y);
        })
    }

    pub fn solve(&self, c: &[f64], eps: f64) -> Result<SolveReport> {
        self.solve_traced_since(c, eps, Instant::now()).map(|(r, _)| r)
    }

    fn solve_traced_since(
        &self,
        c: &[f64],
        eps: f64,
        start: Instant,
    ) -> Result<(SolveReport, Option<LanczosWorkspace>)> {
        let n = self.n();
        ensure_len(c, n, "right-hand side")?;
        ensure_finite(c, "right-hand side")?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(MspError::Domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        let cfg = &self.cfg;
        let mut report = SolveReport::new("msp-general", n);
        let mut used = cfg.clone();
        used.eps = eps;
        report.config = serde_json::to_value(&used).unwrap_or_default();
        for f in &self.flags {
            report.flag(f.clone());
        }
        let normal = self.system();
        let (state, kappa_hat, l) = match &self.kind {
            NormalKind::Dense(chol) => {
                report.matvecs = 2 * self.setup_products;
                let mut rep = finish(report, &normal, c, chol.solve(c), start);
                rep.matvecs += 1;
                return Ok((rep, None));
            }
            NormalKind::Msp { state, kappa_hat, l } => (state, *kappa_hat, *l),
        };
        let products_before = state.products();
        let mut budgets = default_budgets(eps, kappa_hat, n, l, &cfg.tuning);
        if let Some(it) = cfg.level2_iters_override {
            budgets.level2.max_iters = it.max(1);
        }
        if let Some(it) = cfg.level3_iters_override {
            budgets.level3.max_iters = it.max(1);
        }

        let opts = level1_options(eps, cfg.t_max_override, &cfg.tuning);
        let mut stats = GeneralStats::default();
        let (x, ws) = preconditioned_lanczos(
            &normal,
            c,
            &mut |r: &[f64]| solve_m1_general(state, r, &budgets, &mut stats),
            &opts,
        )?;

        report.status = SolveStatus::from(ws.status);
        report.binding_bound = binding_bound(&ws, &opts);
        report.iterations.level1 = ws.iterations();
        report.iterations.level2_total = stats.level2.iterations;
        report.iterations.level3a_total = stats.level3a.iterations;
        report.iterations.level3b_total = stats.level3b.iterations;
        if stats.level2.exhausted + stats.level3a.exhausted + stats.level3b.exhausted > 0 {
            report.flag("inner-budget-exhausted");
        }
        if stats.level2.breakdowns + stats.level3a.breakdowns + stats.level3b.breakdowns > 0 {
            report.flag("inner-breakdown");
        }
        report.matvecs = self.setup_products + (state.products() - products_before) + 2 * ws.op_applies;
        report.residual_history = ws.residual_history.clone();
        report.kappa_m_estimate = ws.kappa_estimate();
        report.preconditioner = Some(crate::nystrom::NystromDiagnostics {
            s: state.s(),
            gamma: state.sketch().gamma,
            phi: state.phi(),
            lambda0: state.lambda0(),
            lambda_tilde: state.lambda_tilde(),
            jitter: state.jitter(),
            kappa_m_estimate: ws.kappa_estimate(),
            sketch: state.sketch(),
        });
        let mut rep = finish(report, &normal, c, x, start);
        rep.matvecs += 1;
        Ok((rep, Some(ws)))
    }
}

/// Solves a square system `A x = b` through the normal equations with `c = Aᵀ b`
/// and `λ = 0`. `final_residual` reports `|A x - b| / |b|`.
pub fn solve_square(a: &Matrix, b: &[f64], cfg: &GeneralSolveConfig) -> Result<SolveReport> {
    ensure_len(b, a.rows(), "right-hand side")?;
    let c = a.apply_transpose(b);
    let mut cfg = cfg.clone();
    cfg.lambda = 0.0;
    let mut rep = solve_normal(a, &c, &cfg)?;
    let bn = norm2(b);
    rep.final_residual = if bn == 0.0 { 0.0 } else { norm2(&sub(&a.apply(&rep.x), b)) / bn };
    Ok(rep)
}
