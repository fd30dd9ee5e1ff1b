//! Coarse Nyström preconditioner `M = C W^{-1} Cᵀ + λ̃ I` built from a sparse sketch.
//!
//! `C = A Sᵀ` and `W = S A Sᵀ` come from one sparse embedding `S`; the shift is
//! `λ̃ = λ + λ₀` where `λ₀` is `(2/l)` times an estimate of the trace of the
//! Nyström residual `A - C W^{-1} Cᵀ`. `M^{-1}` is applied through the regularized
//! inversion formula
//!
//! ```text
//! M^{-1} r = (r - C y) / λ̃,    (Cᵀ C + λ̃ W) y = Cᵀ r,
//! ```
//!
//! where the small `s x s` system is solved iteratively against the prefactored
//! sketched matrix `M₂ = (ΦC)ᵀ(ΦC) + λ̃ W`.

use serde::{Deserialize, Serialize};

use crate::config::MspConfig;
use crate::error::{MspError, Result};
use crate::linalg::vector::{axpy, dot};
use crate::linalg::{Cholesky, DenseMatrix, FnOperator, LinearOperator, Matrix};
use crate::rng::{rademacher_vec, stream_rng, streams};
use crate::sketch::{make_ose_with, make_sparse_embedding, sketch_apply_right, sketch_dense_left, SketchDescriptor};

/// How `λ₀` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lambda0Mode {
    /// Hutchinson estimate of `tr(A - Â_nys)` with the given number of probes.
    Hutchinson { probes: usize },
    /// Exact tail sum `Σ_{i>l} λ_i` supplied by the caller (oracle mode).
    TailSum(f64),
    /// `λ₀` itself.
    Fixed(f64),
}

/// Result of [`estimate_lambda0`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Estimate {
    pub lambda0: f64,
    /// Estimated `tr(A - Â_nys)` before flooring.
    pub tail_trace: f64,
    /// Estimated `tr(A)`.
    pub trace: f64,
}

/// Shape and scalar parameters of a built preconditioner, for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NystromDiagnostics {
    pub s: usize,
    pub gamma: usize,
    pub phi: usize,
    pub lambda0: f64,
    pub lambda_tilde: f64,
    pub jitter: f64,
    pub kappa_m_estimate: Option<f64>,
    pub sketch: SketchDescriptor,
}

/// Cholesky of `W + jitter * I`, escalating the jitter by 10x from
/// `jitter_start * tr(W)/s` up to `jitter_max * tr(W)/s`.
pub fn factor_with_jitter(w: &DenseMatrix, cfg: &MspConfig) -> Result<(Cholesky, f64)> {
    let s = w.rows().max(1);
    let base = (w.trace() / s as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = cfg.jitter_start;
    loop {
        let jitter = rel * base;
        let mut wj = w.clone();
        wj.add_diag(jitter);
        match Cholesky::new(&wj) {
            Ok(c) => return Ok((c, jitter)),
            Err(_) if rel * 10.0 <= cfg.jitter_max * (1.0 + 1e-9) => rel *= 10.0,
            Err(_) => return Err(MspError::RankCollapse { jitter }),
        }
    }
}

/// Hutchinson estimate of `tr(A - C W^{-1} Cᵀ)` using `zᵀAz - |L^{-1} Cᵀ z|²`,
/// returning `λ₀ = (2/l) * max(estimate, 1e-12 * tr̂(A))`.
pub fn estimate_lambda0<A: LinearOperator + ?Sized>(
    a: &A,
    c: &DenseMatrix,
    w_factor: &Cholesky,
    l: usize,
    probes: usize,
    seed: u64,
) -> Result<Lambda0Estimate> {
    if probes == 0 {
        return Err(MspError::Domain("lambda_0 estimation needs at least one probe".into()));
    }
    if l == 0 {
        return Err(MspError::Domain("rank parameter l must be positive".into()));
    }
    let n = a.ncols();
    if c.rows() != n || c.cols() != w_factor.dim() {
        return Err(MspError::DimensionMismatch("C / W shapes disagree with A".into()));
    }
    let mut rng = stream_rng(seed, streams::PROBE);
    let mut total_quad = 0.0;
    let mut total_tail = 0.0;
    for _ in 0..probes {
        let z = rademacher_vec(&mut rng, n);
        let az = a.apply(&z);
        let quad = dot(&z, &az);
        let ctz = c.matvec_t(&z);
        let lz = w_factor.forward(&ctz);
        total_quad += quad;
        total_tail += quad - dot(&lz, &lz);
    }
    let trace = total_quad / probes as f64;
    let tail = total_tail / probes as f64;
    if tail < -0.1 * trace.abs() {
        return Err(MspError::InconsistentEstimate { estimate: tail, trace });
    }
    let floor = 1e-12 * trace.abs();
    Ok(Lambda0Estimate {
        lambda0: 2.0 / l as f64 * tail.max(floor),
        tail_trace: tail,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct NystromPreconditioner {
    c: DenseMatrix,
    /// Symmetrized `W` with the jitter already added.
    w: DenseMatrix,
    w_factor: Cholesky,
    lambda: f64,
    lambda0: f64,
    lambda_tilde: f64,
    jitter: f64,
    tail_trace: Option<f64>,
    /// Cholesky of `(ΦC)ᵀ(ΦC) + λ̃ W`.
    inner: Option<Cholesky>,
    /// Cholesky of `M` itself, used when the sketch is saturated (`s == n`).
    direct: Option<Cholesky>,
    phi: usize,
    sketch: SketchDescriptor,
}

impl NystromPreconditioner {
    /// Assembles a preconditioner from explicit `C` and `W`; the inner factor is
    /// built with the configured OSE.
    pub fn from_parts(
        c: DenseMatrix,
        mut w: DenseMatrix,
        lambda: f64,
        lambda0: Lambda0Mode,
        l: usize,
        delta: f64,
        seed: u64,
        cfg: &MspConfig,
        sketch: SketchDescriptor,
        a_for_estimate: Option<&dyn LinearOperator>,
        build_inner: bool,
    ) -> Result<Self> {
        if c.cols() != w.rows() || w.rows() != w.cols() {
            return Err(MspError::DimensionMismatch("C is n x s and W is s x s".into()));
        }
        w.symmetrize();
        let (w_factor, jitter) = factor_with_jitter(&w, cfg)?;
        w.add_diag(jitter);
        let (lambda0, tail_trace) = match lambda0 {
            Lambda0Mode::Fixed(v) => (v, None),
            Lambda0Mode::TailSum(t) => (2.0 / l.max(1) as f64 * t, Some(t)),
            Lambda0Mode::Hutchinson { probes } => {
                let a = a_for_estimate.ok_or_else(|| {
                    MspError::Domain("Hutchinson lambda_0 needs the operator".into())
                })?;
                let est = estimate_lambda0(a, &c, &w_factor, l, probes, seed)?;
                (est.lambda0, Some(est.tail_trace))
            }
        };
        if !(lambda0 >= 0.0) {
            return Err(MspError::Domain(format!("lambda_0 must be nonnegative, got {lambda0}")));
        }
        let lambda_tilde = lambda + lambda0;
        if !(lambda_tilde > 0.0) {
            return Err(MspError::Domain(
                "regularized shift lambda + lambda_0 must be positive".into(),
            ));
        }
        let n = c.rows();
        let s = c.cols();
        let (inner, phi) = if build_inner {
            let ose = make_ose_with(n, s.min(n), delta.min(0.49), cfg.ose_eps, cfg.ose_c, seed)?;
            let c_sk = ose.apply_dense(&c)?;
            let mut m2 = c_sk.gram();
            for i in 0..s {
                for j in 0..s {
                    m2.add_to(i, j, lambda_tilde * w.get(i, j));
                }
            }
            (Some(factor_with_jitter(&m2, cfg)?.0), ose.rows())
        } else {
            (None, 0)
        };
        Ok(Self {
            c,
            w,
            w_factor,
            lambda,
            lambda0,
            lambda_tilde,
            jitter,
            tail_trace,
            inner,
            direct: None,
            phi,
            sketch,
        })
    }

    /// Attaches an exact factorization of `M`; `M^{-1}` is then applied directly.
    pub fn with_direct(mut self, m_factor: Cholesky) -> Self {
        self.direct = Some(m_factor);
        self
    }

    pub fn direct_factor(&self) -> Option<&Cholesky> {
        self.direct.as_ref()
    }

    pub fn is_saturated(&self) -> bool {
        self.s() >= self.n()
    }

    pub fn n(&self) -> usize {
        self.c.rows()
    }

    pub fn s(&self) -> usize {
        self.c.cols()
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

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

    pub fn tail_trace(&self) -> Option<f64> {
        self.tail_trace
    }

    pub fn inner_factor(&self) -> Option<&Cholesky> {
        self.inner.as_ref()
    }

    pub fn phi(&self) -> usize {
        self.phi
    }

    pub fn sketch(&self) -> SketchDescriptor {
        self.sketch
    }

    pub fn diagnostics(&self, kappa_m_estimate: Option<f64>) -> NystromDiagnostics {
        NystromDiagnostics {
            s: self.s(),
            gamma: self.sketch.gamma,
            phi: self.phi,
            lambda0: self.lambda0,
            lambda_tilde: self.lambda_tilde,
            jitter: self.jitter,
            kappa_m_estimate,
            sketch: self.sketch,
        }
    }

    /// `y ↦ Cᵀ(C y) + λ̃ W y`, the level-2 system matrix applied with two products.
    pub fn level2_operator(&self) -> impl LinearOperator + '_ {
        FnOperator::new(self.s(), move |y: &[f64], out: &mut [f64]| {
            let cy = self.c.matvec(y);
            self.c.matvec_t_into(&cy, out);
            let wy = self.w.matvec(y);
            axpy(self.lambda_tilde, &wy, out);
        })
    }

    /// `ŵ = (r - C ŷ) / λ̃` where `ŷ = inner_solve(Cᵀ r)`.
    pub fn apply_minv_via_formula(
        &self,
        r: &[f64],
        inner_solve: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        if r.len() != self.n() {
            return Err(MspError::DimensionMismatch("M^{-1} r input length".into()));
        }
        let g = self.c.matvec_t(r);
        let y = inner_solve(&g)?;
        Ok(self.finish_formula(r, &y))
    }

    pub(crate) fn finish_formula(&self, r: &[f64], y: &[f64]) -> Vec<f64> {
        let cy = self.c.matvec(y);
        r.iter()
            .zip(&cy)
            .map(|(ri, ci)| (ri - ci) / self.lambda_tilde)
            .collect()
    }

    /// Dense `Cᵀ C + λ̃ W`.
    pub fn level2_dense(&self) -> DenseMatrix {
        let mut b = self.c.gram();
        let s = self.s();
        for i in 0..s {
            for j in 0..s {
                b.add_to(i, j, self.lambda_tilde * self.w.get(i, j));
            }
        }
        b
    }

    /// `M^{-1} r` through a dense factorization of `Cᵀ C + λ̃ W`.
    pub fn exact_minv_reference(&self, r: &[f64]) -> Result<Vec<f64>> {
        const MAX_S: usize = 2000;
        if self.s() > MAX_S {
            return Err(MspError::SizeGuard(format!(
                "exact M^{{-1}} reference limited to s <= {MAX_S}, got {}",
                self.s()
            )));
        }
        let chol = Cholesky::new(&self.level2_dense())?;
        self.apply_minv_via_formula(r, &mut |g| Ok(chol.solve(g)))
    }

    /// Dense `Â_nys = C W^{-1} Cᵀ`.
    pub fn nystrom_dense(&self) -> DenseMatrix {
        let n = self.n();
        let mut winv_ct = DenseMatrix::zeros(self.s(), n);
        for i in 0..n {
            let col = self.w_factor.solve(self.c.row(i));
            winv_ct.set_column(i, &col);
        }
        let mut out = self.c.matmul(&winv_ct).expect("conformal");
        out.symmetrize();
        out
    }

    /// Dense `M = Â_nys + λ̃ I`.
    pub fn dense_m(&self) -> DenseMatrix {
        if let Some(d) = &self.direct {
            let l = d.factor_matrix();
            return l.matmul(&l.transpose()).expect("square");
        }
        let mut m = self.nystrom_dense();
        m.add_diag(self.lambda_tilde);
        m
    }
}

/// Builds the preconditioner for PSD `A` with the default sketch sizing.
pub fn build_nystrom_psd(
    a: &Matrix,
    l: usize,
    lambda: f64,
    delta: f64,
    seed: u64,
    lambda0: Lambda0Mode,
    cfg: &MspConfig,
) -> Result<NystromPreconditioner> {
    let n = a.rows();
    if a.cols() != n {
        return Err(MspError::DimensionMismatch("PSD matrix must be square".into()));
    }
    if l == 0 || l >= n {
        return Err(MspError::Domain(format!("need 0 < l < n (l={l}, n={n})")));
    }
    if !(lambda >= 0.0) {
        return Err(MspError::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let s = cfg.sketch_rows(n, l, delta);
    let gamma = cfg.sketch_gamma(l, delta).min(s);
    let sk = make_sparse_embedding(s, n, gamma, seed)?;
    let c = sketch_apply_right(a, &sk)?;
    let w = sketch_dense_left(&sk, &c)?;
    let saturated = s >= n;
    let p = NystromPreconditioner::from_parts(
        c,
        w,
        lambda,
        lambda0,
        l,
        delta,
        seed,
        cfg,
        sk.descriptor(),
        Some(a),
        !saturated,
    )?;
    if !saturated {
        return Ok(p);
    }
    // A square sketch reproduces A exactly, so M = A + λ̃ I and the inversion
    // formula would cancel catastrophically; factor M instead.
    let mut m = a.to_dense();
    m.symmetrize();
    m.add_diag(p.lambda_tilde());
    let (chol, _) = factor_with_jitter(&m, cfg)?;
    Ok(p.with_direct(chol))
}
