use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};
use crate::linalg::{DenseMatrix, Matrix};
use crate::rng::{stream_rng, streams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    /// `exp(-|x - y|^2 / (2 h^2))`
    Rbf { bandwidth: f64 },
    Linear,
    /// `(x.y + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// One point per row.
    pub points: DenseMatrix,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, points: DenseMatrix) -> Result<Self> {
        match kind {
            KernelKind::Rbf { bandwidth } if !(bandwidth > 0.0) => {
                return Err(MspError::Domain(format!("bandwidth must be positive, got {bandwidth}")))
            }
            KernelKind::Polynomial { offset, .. } if !(offset >= 0.0) => {
                return Err(MspError::Domain("polynomial offset must be nonnegative".into()))
            }
            _ => {}
        }
        Ok(Self { kind, points })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelKind::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelKind::Polynomial { degree, offset } => {
                let ip: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (ip + offset).powi(degree as i32)
            }
        }
    }

    /// Dense kernel matrix, declared symmetric PSD.
    pub fn matrix(&self) -> Result<Matrix> {
        let n = self.points.rows();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            let xi = self.points.row(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.eval(xi, self.points.row(j));
            }
        });
        let mut k = DenseMatrix::from_row_major(n, n, data)?;
        k.symmetrize();
        Matrix::dense(k).into_symmetric_psd()
    }
}

/// `n` points in `d` dimensions drawn around `clusters` centers placed uniformly in
/// `[0, 10]^d`, with isotropic Gaussian spread.
pub fn clustered_points(n: usize, d: usize, clusters: usize, spread: f64, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, streams::INSTANCE ^ 0x4b);
    let clusters = clusters.max(1);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..d).map(|_| rng.random::<f64>() * 10.0).collect())
        .collect();
    let mut pts = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let c = &centers[rng.random_range(0..clusters)];
        let noise = crate::rng::gaussian_vec(&mut rng, d);
        for j in 0..d {
            pts.set(i, j, c[j] + spread * noise[j]);
        }
    }
    pts
}
