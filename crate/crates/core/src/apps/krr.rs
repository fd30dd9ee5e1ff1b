use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};
use crate::linalg::vector::{dot, ensure_len};
use crate::linalg::{effective_dimension, Matrix, SpectrumSummary};
use crate::psd::{solve_psd, PsdSolveConfig, PsdSolver};
use crate::report::SolveReport;
use crate::rng::{derive_seed, rademacher_vec, stream_rng, streams};

/// How `solve_krr` obtains the effective dimension `d_λ = tr(K (K + λI)^{-1})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DlambdaMode {
    /// Hutchinson probes, each solved by a coarse MSP call.
    Bootstrap { probes: usize, eps: f64, l_boot: usize, retries: usize },
    /// Dense eigendecomposition of `K`.
    Dense,
    Known(f64),
}

impl Default for DlambdaMode {
    fn default() -> Self {
        DlambdaMode::Bootstrap { probes: 10, eps: 0.25, l_boot: 64, retries: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrrConfig {
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub d_lambda: DlambdaMode,
}

impl KrrConfig {
    pub fn new(lambda: f64, eps: f64) -> Self {
        Self { lambda, eps, delta: 0.1, seed: 0, d_lambda: DlambdaMode::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlambdaEstimate {
    pub value: f64,
    pub l_boot: usize,
    pub retries: usize,
    pub bootstrap_failed: bool,
}

/// Estimates `d_λ` from `probes` coarse solves `(K + λI) w = z`, using
/// `zᵀ K (K+λI)^{-1} z = zᵀz - λ zᵀw`.
pub fn bootstrap_dlambda(
    k: &Matrix,
    lambda: f64,
    probes: usize,
    eps: f64,
    l_boot: usize,
    retries: usize,
    seed: u64,
) -> Result<DlambdaEstimate> {
    if probes == 0 {
        return Err(MspError::Domain("d_lambda bootstrap needs at least one probe".into()));
    }
    let n = k.rows();
    let mut l = l_boot;
    let mut attempt = 0;
    loop {
        let mut cfg = PsdSolveConfig::new(l.min(n.saturating_sub(1)).max(1), lambda, eps);
        cfg.seed = derive_seed(seed, 1000 + attempt as u64);
        let solver = PsdSolver::prepare(k, &cfg)?;
        let mut total = 0.0;
        let mut failed = false;
        for i in 0..probes {
            let mut rng = stream_rng(derive_seed(seed, i as u64), streams::PROBE ^ 0x6b72);
            let z = rademacher_vec(&mut rng, n);
            let rep = solver.solve(&z, eps)?;
            failed |= !rep.converged();
            total += dot(&z, &z) - lambda * dot(&z, &rep.x);
        }
        if !failed || attempt >= retries {
            return Ok(DlambdaEstimate {
                value: (total / probes as f64).clamp(0.0, n as f64),
                l_boot: l,
                retries: attempt,
                bootstrap_failed: failed,
            });
        }
        attempt += 1;
        l *= 2;
    }
}

/// Solves the kernel ridge system `(K + λI) α = y` with `l ≈ 2 d_λ`.
pub fn solve_krr(k: &Matrix, y: &[f64], cfg: &KrrConfig) -> Result<SolveReport> {
    if !(cfg.lambda > 0.0) {
        return Err(MspError::Domain(format!("kernel ridge needs lambda > 0, got {}", cfg.lambda)));
    }
    let n = k.rows();
    ensure_len(y, n, "labels")?;
    let mut flags = Vec::new();
    let d_hat = match cfg.d_lambda {
        DlambdaMode::Known(d) => d,
        DlambdaMode::Dense => {
            let spec = SpectrumSummary::psd_eigenvalues(crate::linalg::eig::sym_eigenvalues(&k.to_dense())?)?;
            effective_dimension(&spec, cfg.lambda)?
        }
        DlambdaMode::Bootstrap { probes, eps, l_boot, retries } => {
            let est = bootstrap_dlambda(k, cfg.lambda, probes, eps, l_boot, retries, cfg.seed)?;
            if est.retries > 0 {
                flags.push("bootstrap-retry".to_string());
            }
            if est.bootstrap_failed {
                flags.push("bootstrap-diverged".to_string());
            }
            est.value
        }
    };

    let lo = (n as f64).log2().ceil() as usize + 1;
    let hi = n / 2;
    let mut cfg_psd = PsdSolveConfig::new(1, cfg.lambda, cfg.eps);
    cfg_psd.delta = cfg.delta;
    cfg_psd.seed = cfg.seed;
    let mut rep = if d_hat > n as f64 / 4.0 || lo > hi {
        let mut m = k.to_dense();
        m.add_diag(cfg.lambda);
        let x = crate::linalg::dense_factor_solve(&Matrix::dense(m), y)?;
        let mut r = SolveReport::new("krr", n);
        r.final_residual = residual(k, cfg.lambda, &x, y);
        r.x = x;
        r.matvecs = n;
        r.flag("dense-fallback");
        r
    } else {
        cfg_psd.l = ((2.0 * d_hat).ceil() as usize).clamp(lo, hi);
        let mut r = solve_psd(k, y, &cfg_psd)?;
        r.method = "krr".into();
        r
    };
    for f in flags {
        rep.flag(f);
    }
    rep.config = serde_json::json!({
        "krr": cfg,
        "d_lambda_estimate": d_hat,
        "l": cfg_psd.l,
    });
    Ok(rep)
}

fn residual(k: &Matrix, lambda: f64, x: &[f64], y: &[f64]) -> f64 {
    use crate::linalg::LinearOperator;
    let mut kx = k.apply(x);
    crate::linalg::vector::axpy(lambda, x, &mut kx);
    let yn = crate::linalg::vector::norm2(y);
    let r = crate::linalg::vector::norm2(&crate::linalg::vector::sub(&kx, y));
    if yn == 0.0 { r } else { r / yn }
}
