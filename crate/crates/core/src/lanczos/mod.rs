//! Left-preconditioned Lanczos with an inexact preconditioner solve.
//!
//! The iteration keeps two families of vectors: the "under" vectors `q_i` living in the
//! range of `A`, and the "over" vectors `q̄_i = M^{-1} q_i` obtained through a
//! user-supplied [`SolveM`] routine that only approximates `M^{-1}`. The tridiagonal
//! coefficients are formed from mixed inner products `<u, q̄>` and `<w, w̄>`, so the
//! method never needs `M^{1/2}` and tolerates a small relative error in each solve.
//! The returned iterate is `z' Q̄ T'^{-1} e_1`.
//!
//! Stopping is driven by three mechanisms:
//! * a fixed or Ritz-adapted iteration budget,
//! * the free preconditioned-residual estimate `β'_{t+1} |e_t^T T'^{-1} e_1|`, which
//!   times `sqrt(κ_M)` bounds the relative `A`-norm error (`tolerance`),
//! * explicit `|A x - b|` checkpoints (`residual_target`, every `check_every` steps).
//!
//! The full `Q̄` basis is kept, so any earlier iterate can be rebuilt afterwards
//! with [`LanczosWorkspace::iterate_at`].

mod reference;
mod tridiag;

pub use reference::symmetric_lanczos_reference;
pub use tridiag::{tridiag_solve_e1, TridiagonalMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};
use crate::linalg::vector::{axpy, dot, norm2, scale};
use crate::linalg::{Factorization, LinearOperator};

/// Approximate application of `M^{-1}`.
pub trait SolveM {
    fn solve_m(&mut self, r: &[f64]) -> Result<Vec<f64>>;
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> SolveM for F {
    fn solve_m(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        self(r)
    }
}

/// `M = I`.
pub struct IdentitySolve;

impl SolveM for IdentitySolve {
    fn solve_m(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// Exact `M^{-1}` from a stored factorization.
pub struct FactorSolve<'a>(pub &'a Factorization);

impl SolveM for FactorSolve<'_> {
    fn solve_m(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.solve(r))
    }
}

/// A `SolveM` routine together with the relative `M`-norm accuracy it promises:
/// `|solve(r) - M^{-1} r|_M <= eps0 * |M^{-1} r|_M`.
pub struct SolveMContract<S> {
    pub solver: S,
    pub eps0: f64,
}

impl<S: SolveM> SolveM for SolveMContract<S> {
    fn solve_m(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve_m(r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LanczosStatus {
    Running,
    Converged,
    Breakdown,
    BudgetExhausted,
}

/// Ritz-driven iteration budget: after `warmup` steps the cap becomes
/// `ceil(c * sqrt(κ̂) * ln(κ̂ / eps))` with `κ̂ = inflation * θ_max / θ_min`, and it is
/// re-derived at every checkpoint as the Ritz values spread.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveBudget {
    pub warmup: usize,
    pub c: f64,
    pub eps: f64,
    pub inflation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Hard iteration cap.
    pub max_iters: usize,
    /// Target relative `A`-norm error, checked through the residual estimate.
    pub tolerance: Option<f64>,
    /// Explicit relative residual target `|A x - b| <= target * |b|`.
    pub residual_target: Option<f64>,
    /// Explicit residual checkpoints every this many steps (0 disables them).
    pub check_every: usize,
    pub adaptive_budget: Option<AdaptiveBudget>,
    /// Inflation applied to the Ritz condition estimate used with `tolerance`.
    pub ritz_inflation: f64,
    /// Record per-iteration coefficients.
    pub trace: bool,
    /// Keep the "under" vectors as well (diagnostics only).
    pub keep_under: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tolerance: None,
            residual_target: None,
            check_every: 0,
            adaptive_budget: None,
            ritz_inflation: 2.0,
            trace: false,
            keep_under: false,
        }
    }
}

impl LanczosOptions {
    pub fn fixed(iters: usize) -> Self {
        Self {
            max_iters: iters,
            ..Self::default()
        }
    }

    pub fn with_tolerance(max_iters: usize, tol: f64) -> Self {
        Self {
            max_iters,
            tolerance: Some(tol),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iter: usize,
    /// `|A x - b| / |b|`
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub i: usize,
    pub alpha: f64,
    pub beta_next: f64,
    /// Preconditioned residual estimate after step `i`.
    pub estimate: f64,
    pub checkpoint_residual: Option<f64>,
}

/// Everything the iteration produced besides the solution.
#[derive(Clone, Debug)]
pub struct LanczosWorkspace {
    pub q_over: Vec<Vec<f64>>,
    pub q_under: Vec<Vec<f64>>,
    pub z_prime: f64,
    pub tridiag: TridiagonalMatrix,
    pub status: LanczosStatus,
    /// `β'_{t+1}` from the last completed step.
    pub last_beta: f64,
    pub residual_history: Vec<Checkpoint>,
    pub estimate_history: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub solve_m_calls: usize,
    pub op_applies: usize,
    /// `(θ_min, θ_max)` of the final tridiagonal.
    pub ritz_extremes: Option<(f64, f64)>,
    /// Iteration cap actually in force at exit.
    pub budget: usize,
}

impl LanczosWorkspace {
    fn new() -> Self {
        Self {
            q_over: Vec::new(),
            q_under: Vec::new(),
            z_prime: 0.0,
            tridiag: TridiagonalMatrix::empty(),
            status: LanczosStatus::Running,
            last_beta: 0.0,
            residual_history: Vec::new(),
            estimate_history: Vec::new(),
            trace: Vec::new(),
            solve_m_calls: 0,
            op_applies: 0,
            ritz_extremes: None,
            budget: 0,
        }
    }

    /// Number of completed iterations (dimension of `T'`).
    pub fn iterations(&self) -> usize {
        self.tridiag.dim()
    }

    /// The iterate `x_t = z' Q̄_t T_t'^{-1} e_1` for any `1 <= t <= iterations()`.
    pub fn iterate_at(&self, t: usize) -> Result<Vec<f64>> {
        if t == 0 || t > self.iterations() {
            return Err(MspError::Domain(format!(
                "iterate index {t} outside 1..={}",
                self.iterations()
            )));
        }
        let y = tridiag_solve_e1(&self.tridiag.leading(t), self.z_prime)?;
        let n = self.q_over[0].len();
        let mut x = vec![0.0; n];
        for (k, yk) in y.iter().enumerate() {
            axpy(*yk, &self.q_over[k], &mut x);
        }
        Ok(x)
    }

    /// Ritz-value estimate of `κ(M^{-1/2} A M^{-1/2})`, uninflated.
    pub fn kappa_estimate(&self) -> Option<f64> {
        self.ritz_extremes
            .and_then(|(lo, hi)| (lo > 0.0).then_some(hi / lo))
    }
}

/// Relative tolerance for mixed inner products `<v, M^{-1} v>`: values below
/// `-BREAKDOWN_TOL * |v| |M^{-1} v|` indicate an indefinite (broken) preconditioner solve.
const BREAKDOWN_TOL: f64 = 1e-14;

fn ritz_kappa(t: &TridiagonalMatrix, inflation: f64) -> Option<(f64, f64, f64)> {
    let (lo, hi) = t.extreme_eigenvalues();
    if lo > 0.0 && hi.is_finite() {
        Some((lo, hi, inflation * hi / lo))
    } else {
        None
    }
}

fn budget_from(kappa: f64, ab: &AdaptiveBudget) -> usize {
    let k = kappa.max(1.0);
    let val = ab.c * k.sqrt() * (k / ab.eps).ln().max(1.0);
    val.ceil() as usize
}

/// Preconditioned Lanczos iteration for SPD `A` with an inexact preconditioner solve.
pub fn preconditioned_lanczos<A, S>(
    a: &A,
    b: &[f64],
    solve_m: &mut S,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, LanczosWorkspace)>
where
    A: LinearOperator + ?Sized,
    S: SolveM + ?Sized,
{
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(MspError::DimensionMismatch(format!(
            "Lanczos: operator is {}x{}, right-hand side has length {n}",
            a.nrows(),
            a.ncols()
        )));
    }
    if opts.max_iters == 0 {
        return Err(MspError::Domain("Lanczos needs at least one iteration".into()));
    }
    let mut ws = LanczosWorkspace::new();
    ws.budget = opts.max_iters;
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        ws.status = LanczosStatus::Converged;
        return Ok((vec![0.0; n], ws));
    }

    let w_bar0 = solve_m.solve_m(b)?;
    ws.solve_m_calls += 1;
    let ip0 = dot(b, &w_bar0);
    let tol0 = BREAKDOWN_TOL * b_norm * norm2(&w_bar0);
    if !(ip0 > tol0) {
        ws.status = LanczosStatus::Breakdown;
        return Ok((vec![0.0; n], ws));
    }
    let z = ip0.sqrt();
    ws.z_prime = z;

    let mut q_under_prev = vec![0.0; n];
    let mut q_under: Vec<f64> = b.iter().map(|v| v / z).collect();
    let mut q_over: Vec<f64> = w_bar0.iter().map(|v| v / z).collect();
    let mut beta = 0.0;
    let mut budget = opts.max_iters;
    let mut tscale = 0.0_f64;
    let mut best_checkpoint: Option<(f64, Vec<f64>)> = None;
    let mut u = vec![0.0; n];

    let mut i = 0;
    loop {
        i += 1;
        // u_i = A q̄_i - β_i q_{i-1}
        a.apply_into(&q_over, &mut u);
        ws.op_applies += 1;
        if beta != 0.0 {
            axpy(-beta, &q_under_prev, &mut u);
        }
        let alpha = dot(&u, &q_over);
        // w_i = u_i - α_i q_i
        let mut w = u.clone();
        axpy(-alpha, &q_under, &mut w);
        let w_bar = solve_m.solve_m(&w)?;
        ws.solve_m_calls += 1;
        let ip = dot(&w, &w_bar);

        ws.tridiag.push_alpha(alpha);
        ws.q_over.push(std::mem::take(&mut q_over));
        if opts.keep_under {
            ws.q_under.push(q_under.clone());
        }
        tscale = tscale.max(alpha.abs() + beta.abs());

        let ip_tol = BREAKDOWN_TOL * norm2(&w) * norm2(&w_bar);
        let broke = ip < -ip_tol;
        let beta_next = ip.max(0.0).sqrt();
        ws.last_beta = beta_next;

        let y = tridiag_solve_e1(&ws.tridiag, 1.0);
        let estimate = match &y {
            Ok(y) => beta_next * y[y.len() - 1].abs(),
            Err(_) => f64::INFINITY,
        };
        ws.estimate_history.push(estimate);

        let exhausted = !broke && beta_next <= BREAKDOWN_TOL * tscale.max(f64::MIN_POSITIVE);

        // budget adaptation after warmup and at checkpoints
        let checkpoint_due = opts.check_every > 0 && i % opts.check_every == 0;
        if let Some(ab) = &opts.adaptive_budget {
            if i == ab.warmup || (i > ab.warmup && checkpoint_due) {
                if let Some((_, _, k)) = ritz_kappa(&ws.tridiag, ab.inflation) {
                    let proposal = budget_from(k, ab).max(ab.warmup);
                    budget = if i == ab.warmup {
                        proposal.min(opts.max_iters)
                    } else {
                        budget.max(proposal).min(opts.max_iters)
                    };
                }
            }
        }

        let mut converged = false;
        if let Some(tol) = opts.tolerance {
            if estimate.is_finite() {
                if let Some((_, _, k)) = ritz_kappa(&ws.tridiag, opts.ritz_inflation) {
                    if k.max(1.0).sqrt() * estimate <= tol {
                        converged = true;
                    }
                }
            }
        }

        let mut checkpoint_residual = None;
        let want_explicit = checkpoint_due || (opts.residual_target.is_some() && converged);
        if want_explicit {
            if let Ok(x) = ws.iterate_at(i) {
                let mut ax = vec![0.0; n];
                a.apply_into(&x, &mut ax);
                ws.op_applies += 1;
                let res = norm2(&crate::linalg::vector::sub(&ax, b)) / b_norm;
                ws.residual_history.push(Checkpoint { iter: i, residual: res });
                checkpoint_residual = Some(res);
                if best_checkpoint.as_ref().is_none_or(|(r, _)| res < *r) {
                    best_checkpoint = Some((res, x));
                }
                if let Some(target) = opts.residual_target {
                    converged = res <= target;
                }
            }
        }

        if opts.trace {
            ws.trace.push(TraceEntry {
                i,
                alpha,
                beta_next,
                estimate,
                checkpoint_residual,
            });
        }

        if broke {
            ws.status = LanczosStatus::Breakdown;
            break;
        }
        if exhausted || converged {
            ws.status = LanczosStatus::Converged;
            break;
        }
        if i >= budget {
            ws.status = LanczosStatus::BudgetExhausted;
            break;
        }

        ws.tridiag.push_beta(beta_next);
        q_under_prev = std::mem::replace(&mut q_under, w);
        scale(1.0 / beta_next, &mut q_under);
        q_over = w_bar;
        scale(1.0 / beta_next, &mut q_over);
        beta = beta_next;
    }

    ws.budget = budget;
    ws.ritz_extremes = ritz_kappa(&ws.tridiag, 1.0).map(|(lo, hi, _)| (lo, hi));
    let t = ws.iterations();
    let x = match ws.iterate_at(t) {
        Ok(x) if x.iter().all(|v| v.is_finite()) => x,
        _ => {
            ws.status = LanczosStatus::Breakdown;
            best_checkpoint.map(|(_, x)| x).unwrap_or_else(|| vec![0.0; n])
        }
    };
    Ok((x, ws))
}
