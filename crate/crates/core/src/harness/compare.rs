use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::MspConfig;
use crate::error::{MspError, Result};
use crate::general::{solve_square, GeneralSolveConfig};
use crate::lanczos::{preconditioned_lanczos, IdentitySolve, LanczosOptions};
use crate::linalg::vector::{axpy, norm2, sub};
use crate::linalg::{dense_factor_solve, DenseMatrix, FnOperator, LinearOperator, Matrix, Symmetry};
use crate::psd::{solve_psd, PsdSolveConfig};
use crate::report::{SolveReport, SolveStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    PlainLanczos,
    MspPsd,
    MspGeneral,
    DenseDirect,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::PlainLanczos,
        SolverKind::MspPsd,
        SolverKind::MspGeneral,
        SolverKind::DenseDirect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::PlainLanczos => "plain-lanczos",
            SolverKind::MspPsd => "msp-psd",
            SolverKind::MspGeneral => "msp-general",
            SolverKind::DenseDirect => "dense-direct",
        }
    }
}

/// The system every solver in a comparison is judged against.
///
/// Symmetric PSD inputs give `(A + λI) x = b`. Anything else gives
/// `(AᵀA + λI) x = Aᵀb`, which for square nonsingular `A` and `λ = 0` has the
/// solution of `A x = b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    ShiftedPsd,
    NormalEquations,
}

pub fn system_kind(a: &Matrix) -> SystemKind {
    if a.symmetry() == Symmetry::SymmetricPsd {
        SystemKind::ShiftedPsd
    } else {
        SystemKind::NormalEquations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub solvers: Vec<SolverKind>,
    pub eps: f64,
    pub l: usize,
    pub lambda: f64,
    pub delta: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub warmup: bool,
    pub tuning: MspConfig,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            solvers: SolverKind::ALL.to_vec(),
            eps: 1e-8,
            l: 32,
            lambda: 0.0,
            delta: 0.1,
            seed: 0,
            max_iters: 20_000,
            warmup: true,
            tuning: MspConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub matvecs: usize,
    pub wall_ms: f64,
    /// Recomputed from `(A, b, x)` by the harness.
    pub residual: f64,
    pub claimed_residual: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub threads: usize,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub instance: serde_json::Value,
    pub system: SystemKind,
    pub options: CompareOptions,
    pub rows: Vec<BenchRow>,
    pub reports: Vec<SolveReport>,
    pub environment: Environment,
}

impl BenchmarkReport {
    pub fn row(&self, solver: SolverKind) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.solver == solver.name())
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>10} {:>10} {:>12} {:>12} {:>18}\n",
            "solver", "iters", "matvecs", "wall_ms", "residual", "status"
        );
        for r in &self.rows {
            let status = match (&r.error, r.status) {
                (Some(e), _) => format!("error: {e}"),
                (None, Some(s)) => serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                (None, None) => String::new(),
            };
            out.push_str(&format!(
                "{:<14} {:>10} {:>10} {:>12.2} {:>12.3e} {:>18}\n",
                r.solver, r.iterations, r.matvecs, r.wall_ms, r.residual, status
            ));
        }
        out
    }

    /// True when no solver errored or failed to converge.
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none() && r.status == Some(SolveStatus::Converged))
    }
}

/// `|K x - rhs| / |rhs|`, evaluated with plain products independent of any solver.
pub fn recompute_residual(a: &Matrix, b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let (kx, rhs) = match system_kind(a) {
        SystemKind::ShiftedPsd => {
            let mut kx = a.apply(x);
            axpy(lambda, x, &mut kx);
            (kx, b.to_vec())
        }
        SystemKind::NormalEquations => {
            let mut kx = a.apply_transpose(&a.apply(x));
            axpy(lambda, x, &mut kx);
            (kx, a.apply_transpose(b))
        }
    };
    let rn = norm2(&rhs);
    let r = norm2(&sub(&kx, &rhs));
    if rn == 0.0 { r } else { r / rn }
}

fn run_one(kind: SolverKind, a: &Matrix, b: &[f64], opts: &CompareOptions) -> Result<SolveReport> {
    let sys = system_kind(a);
    match kind {
        SolverKind::PlainLanczos => {
            let start = Instant::now();
            let n = a.cols();
            let (rhs, op): (Vec<f64>, Box<dyn LinearOperator + '_>) = match sys {
                SystemKind::ShiftedPsd => (
                    b.to_vec(),
                    Box::new(crate::linalg::Shifted { inner: a, shift: opts.lambda }),
                ),
                SystemKind::NormalEquations => (
                    a.apply_transpose(b),
                    Box::new(FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
                        a.apply_transpose_into(&a.apply(x), y);
                        axpy(opts.lambda, x, y);
                    })),
                ),
            };
            let lopts = LanczosOptions {
                check_every: opts.tuning.check_every,
                ritz_inflation: opts.tuning.ritz_inflation,
                ..LanczosOptions::with_tolerance(opts.max_iters, opts.eps)
            };
            let (x, ws) = preconditioned_lanczos(op.as_ref(), &rhs, &mut IdentitySolve, &lopts)?;
            let mut rep = SolveReport::new("plain-lanczos", n);
            rep.status = ws.status.into();
            rep.iterations.level1 = ws.iterations();
            let per = if sys == SystemKind::NormalEquations { 2 } else { 1 };
            rep.matvecs = per * ws.op_applies;
            rep.residual_history = ws.residual_history.clone();
            rep.kappa_m_estimate = ws.kappa_estimate();
            let r = op.apply(&x);
            let rn = norm2(&rhs);
            rep.final_residual = if rn == 0.0 { norm2(&r) } else { norm2(&sub(&r, &rhs)) / rn };
            rep.x = x;
            rep.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(rep)
        }
        SolverKind::MspPsd => {
            if sys != SystemKind::ShiftedPsd {
                return Err(MspError::Domain("msp-psd needs a symmetric PSD matrix".into()));
            }
            let mut cfg = PsdSolveConfig::new(opts.l, opts.lambda, opts.eps).with_seed(opts.seed);
            cfg.delta = opts.delta;
            cfg.tuning = opts.tuning.clone();
            solve_psd(a, b, &cfg)
        }
        SolverKind::MspGeneral => {
            let mut cfg = GeneralSolveConfig::new(opts.l, opts.lambda, opts.eps).with_seed(opts.seed);
            cfg.delta = opts.delta;
            cfg.tuning = opts.tuning.clone();
            match sys {
                SystemKind::NormalEquations => {
                    crate::general::solve_normal(a, &a.apply_transpose(b), &cfg)
                }
                SystemKind::ShiftedPsd => {
                    // Square symmetric input: solve (A + λI) x = b as a general system.
                    let mut shifted = a.to_dense();
                    shifted.add_diag(opts.lambda);
                    let m = Matrix::dense(shifted);
                    solve_square(&m, b, &cfg)
                }
            }
        }
        SolverKind::DenseDirect => {
            let start = Instant::now();
            let n = a.cols();
            let (k, rhs) = match sys {
                SystemKind::ShiftedPsd => {
                    let mut k = a.to_dense();
                    k.add_diag(opts.lambda);
                    (k, b.to_vec())
                }
                SystemKind::NormalEquations => {
                    let mut k: DenseMatrix = a.to_dense().gram();
                    k.add_diag(opts.lambda);
                    (k, a.apply_transpose(b))
                }
            };
            let km = Matrix::dense(k);
            let x = dense_factor_solve(&km, &rhs)?;
            let mut rep = SolveReport::new("dense-direct", n);
            rep.iterations.level1 = 1;
            rep.matvecs = n;
            let rn = norm2(&rhs);
            let r = norm2(&sub(&km.apply(&x), &rhs));
            rep.final_residual = if rn == 0.0 { r } else { r / rn };
            rep.x = x;
            rep.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(rep)
        }
    }
}

/// Runs every requested solver on `(A, b)`. A failing solver is recorded in its
/// row and the remaining ones still run.
pub fn run_compare(a: &Matrix, b: &[f64], instance: serde_json::Value, opts: &CompareOptions) -> BenchmarkReport {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &kind in &opts.solvers {
        if opts.warmup {
            let _ = run_one(kind, a, b, opts);
        }
        let start = Instant::now();
        match run_one(kind, a, b, opts) {
            Ok(mut rep) => {
                let wall = start.elapsed().as_secs_f64() * 1e3;
                rep.wall_ms = wall;
                rows.push(BenchRow {
                    solver: kind.name().into(),
                    status: Some(rep.status),
                    iterations: rep.iterations.level1,
                    matvecs: rep.matvecs,
                    wall_ms: wall,
                    residual: recompute_residual(a, b, opts.lambda, &rep.x),
                    claimed_residual: rep.final_residual,
                    error: None,
                });
                reports.push(rep);
            }
            Err(e) => rows.push(BenchRow {
                solver: kind.name().into(),
                status: None,
                iterations: 0,
                matvecs: 0,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                residual: f64::NAN,
                claimed_residual: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }
    BenchmarkReport {
        schema: crate::report::REPORT_SCHEMA,
        instance,
        system: system_kind(a),
        options: opts.clone(),
        rows,
        reports,
        environment: Environment::current(),
    }
}
