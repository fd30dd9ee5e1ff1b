use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::apps::kernel::{clustered_points, KernelKind, KernelSpec};
use crate::error::{MspError, Result};
use crate::linalg::{eig, CsrMatrix, DenseMatrix, Matrix, SpectrumSummary};
use crate::rng::{gaussian_vec, stream_rng, streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    KLargePsd,
    KLargeGeneral,
    HiddenRotation,
    BlockLowerbound,
    RbfKernel,
    MtxFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    /// Row count for rectangular generators (defaults to `n`).
    pub m: Option<usize>,
    pub k: usize,
    /// Ratio between the large values and the tail.
    pub ratio: f64,
    pub tail: (f64, f64),
    /// Hidden-rotation indices (0-based); drawn from the seed when absent.
    pub rotation: Option<(usize, usize)>,
    pub bandwidth: f64,
    pub dim: usize,
    pub clusters: usize,
    pub spread: f64,
    pub path: Option<PathBuf>,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::KLargePsd,
            n: 256,
            m: None,
            k: 8,
            ratio: 1e4,
            tail: (1.0, 2.0),
            rotation: None,
            bandwidth: 1.0,
            dim: 2,
            clusters: 8,
            spread: 0.3,
            path: None,
            seed: 0,
        }
    }
}

impl InstanceSpec {
    pub fn k_large_psd(n: usize, k: usize, ratio: f64, seed: u64) -> Self {
        Self { kind: GeneratorKind::KLargePsd, n, k, ratio, seed, ..Self::default() }
    }

    pub fn k_large_general(m: usize, n: usize, k: usize, ratio: f64, seed: u64) -> Self {
        Self { kind: GeneratorKind::KLargeGeneral, n, m: Some(m), k, ratio, seed, ..Self::default() }
    }

    pub fn hidden_rotation(n: usize, i: usize, j: usize) -> Self {
        Self { kind: GeneratorKind::HiddenRotation, n, rotation: Some((i, j)), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MspError::Domain(format!("instance spec: {m}")));
        if self.kind != GeneratorKind::MtxFile && self.n == 0 {
            return bad("n must be positive".into());
        }
        match self.kind {
            GeneratorKind::KLargePsd | GeneratorKind::KLargeGeneral | GeneratorKind::BlockLowerbound => {
                if self.k > self.n {
                    return bad(format!("k = {} exceeds n = {}", self.k, self.n));
                }
                if !(self.ratio > 0.0) || !(self.tail.0 > 0.0 && self.tail.0 <= self.tail.1) {
                    return bad("need ratio > 0 and 0 < tail.0 <= tail.1".into());
                }
                if let Some(m) = self.m {
                    if m < self.n {
                        return bad(format!("m = {m} must be >= n = {}", self.n));
                    }
                }
            }
            GeneratorKind::HiddenRotation => {
                if self.n < 2 {
                    return bad("hidden rotation needs n >= 2".into());
                }
                if let Some((i, j)) = self.rotation {
                    if i == j || i >= self.n || j >= self.n {
                        return bad(format!("rotation indices ({i}, {j}) invalid for n = {}", self.n));
                    }
                }
            }
            GeneratorKind::RbfKernel => {
                if !(self.bandwidth > 0.0) || self.dim == 0 {
                    return bad("rbf kernel needs bandwidth > 0 and dim >= 1".into());
                }
            }
            GeneratorKind::MtxFile => {
                if self.path.is_none() {
                    return bad("mtx-file needs a path".into());
                }
            }
        }
        Ok(())
    }

    /// Requested spectrum for the k-large generators: `k` values evenly spaced in
    /// `ratio * [tail.0, tail.1]` over `n - k` values evenly spaced in `[tail.0, tail.1]`.
    pub fn target_values(&self) -> Vec<f64> {
        let (lo, hi) = self.tail;
        let spaced = |count: usize, a: f64, b: f64| -> Vec<f64> {
            (0..count)
                .map(|i| if count == 1 { b } else { b - (b - a) * i as f64 / (count - 1) as f64 })
                .collect()
        };
        let mut v = spaced(self.k, self.ratio * lo, self.ratio * hi);
        v.extend(spaced(self.n - self.k, lo, hi));
        v
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub a: Matrix,
    pub b: Vec<f64>,
    /// Eigenvalues (PSD generators) or singular values (general ones), when known.
    pub spectrum: Option<SpectrumSummary>,
    pub x_true: Option<Vec<f64>>,
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, streams::INSTANCE ^ 0x51);
    let g = nalgebra::DMatrix::from_row_slice(n, n, &gaussian_vec(&mut rng, n * n));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    DenseMatrix::from_nalgebra(&q)
}

/// `U diag(values) V^T` with `U` of size `m x n` taken from the first `n` columns.
fn scaled_product(u: &DenseMatrix, values: &[f64], v: &DenseMatrix) -> DenseMatrix {
    let n = values.len();
    let us = DenseMatrix::from_fn(u.rows(), n, |i, j| u.get(i, j) * values[j]);
    us.matmul(&v.transpose()).expect("conformal")
}

pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = stream_rng(spec.seed, streams::INSTANCE);
    match spec.kind {
        GeneratorKind::KLargePsd => {
            let values = spec.target_values();
            let q = random_orthogonal(n, spec.seed);
            let mut a = scaled_product(&q, &values, &q);
            a.symmetrize();
            let b = gaussian_vec(&mut rng, n);
            Ok(Instance {
                spec: spec.clone(),
                a: Matrix::dense(a).into_symmetric_psd()?,
                b,
                spectrum: Some(SpectrumSummary::eigenvalues(values)),
                x_true: None,
            })
        }
        GeneratorKind::KLargeGeneral => {
            let m = spec.m.unwrap_or(n);
            let values = spec.target_values();
            let u_full = random_orthogonal(m, crate::rng::derive_seed(spec.seed, 1));
            let u = DenseMatrix::from_fn(m, n, |i, j| u_full.get(i, j));
            let v = random_orthogonal(n, crate::rng::derive_seed(spec.seed, 2));
            let a = scaled_product(&u, &values, &v);
            let b = gaussian_vec(&mut rng, m);
            Ok(Instance {
                spec: spec.clone(),
                a: Matrix::dense(a),
                b,
                spectrum: Some(SpectrumSummary::singular_values(values)),
                x_true: None,
            })
        }
        GeneratorKind::HiddenRotation => {
            let (i, j) = spec.rotation.unwrap_or_else(|| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            });
            let (a, x) = hidden_rotation(n, i, j)?;
            let mut sv = vec![1.0; n];
            sv[0] = 2f64.sqrt();
            sv[1] = 2f64.sqrt();
            let mut spec = spec.clone();
            spec.rotation = Some((i, j));
            Ok(Instance {
                spec,
                a: Matrix::csr(a),
                b: vec![1.0; n],
                spectrum: Some(SpectrumSummary::singular_values(sv)),
                x_true: Some(x),
            })
        }
        GeneratorKind::BlockLowerbound => {
            let k = spec.k.max(1);
            let block = DenseMatrix::from_row_major(k, k, gaussian_vec(&mut rng, k * k))?;
            block_lowerbound(&block, n, spec.seed).map(|(a, b, sv)| Instance {
                spec: spec.clone(),
                a: Matrix::dense(a),
                b,
                spectrum: Some(sv),
                x_true: None,
            })
        }
        GeneratorKind::RbfKernel => {
            let pts = clustered_points(n, spec.dim, spec.clusters, spec.spread, spec.seed);
            let k = KernelSpec::new(KernelKind::Rbf { bandwidth: spec.bandwidth }, pts)?.matrix()?;
            let b = gaussian_vec(&mut rng, n);
            Ok(Instance { spec: spec.clone(), a: k, b, spectrum: None, x_true: None })
        }
        GeneratorKind::MtxFile => {
            let path = spec.path.as_ref().expect("validated");
            let a = crate::io::read_matrix(path)?;
            let rows = a.rows();
            let b = gaussian_vec(&mut rng, rows);
            let mut spec = spec.clone();
            spec.n = a.cols();
            Ok(Instance { spec, a, b, spectrum: None, x_true: None })
        }
    }
}

/// `I + e_i e_j^T - e_j e_i^T` and the solution of `A x = 1`: all ones except `x_i = 0`.
pub fn hidden_rotation(n: usize, i: usize, j: usize) -> Result<(CsrMatrix, Vec<f64>)> {
    if i == j || i >= n || j >= n {
        return Err(MspError::Domain(format!("rotation indices ({i}, {j}) invalid for n = {n}")));
    }
    let mut t: Vec<(usize, usize, f64)> = (0..n).map(|d| (d, d, 1.0)).collect();
    t.push((i, j, 1.0));
    t.push((j, i, -1.0));
    let a = CsrMatrix::from_triplets(n, n, &t)?;
    let mut x = vec![1.0; n];
    x[i] = 0.0;
    Ok((a, x))
}

/// `[M 0; 0 sigma_min(M) I]` of size `n`, a right-hand side, and its singular values.
pub fn block_lowerbound(block: &DenseMatrix, n: usize, seed: u64) -> Result<(DenseMatrix, Vec<f64>, SpectrumSummary)> {
    let k = block.rows();
    if block.cols() != k || k > n {
        return Err(MspError::DimensionMismatch("block must be square with k <= n".into()));
    }
    let sv = eig::singular_values(block);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            a.set(i, j, block.get(i, j));
        }
    }
    for d in k..n {
        a.set(d, d, smin);
    }
    let mut all = sv;
    all.extend(std::iter::repeat_n(smin, n - k));
    let mut rng = stream_rng(seed, streams::INSTANCE ^ 0x42);
    Ok((a, gaussian_vec(&mut rng, n), SpectrumSummary::singular_values(all)))
}
