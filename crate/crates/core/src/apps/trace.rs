use rayon::prelude::*;

use crate::error::{MspError, Result};
use crate::linalg::vector::dot;
use crate::linalg::LinearOperator;
use crate::rng::{derive_seed, rademacher_vec, stream_rng, streams};

/// Hutchinson estimate of `tr(B)` from Rademacher probes.
///
/// Returns the sample mean and its standard error. Probe `i` draws from its own
/// stream so the result does not depend on the thread count.
pub fn hutchinson_trace<B: LinearOperator + Sync + ?Sized>(op: &B, probes: usize, seed: u64) -> Result<(f64, f64)> {
    if probes < 2 {
        return Err(MspError::Domain(format!("hutchinson_trace needs at least 2 probes, got {probes}")));
    }
    if op.nrows() != op.ncols() {
        return Err(MspError::DimensionMismatch(format!(
            "trace of a {}x{} operator",
            op.nrows(),
            op.ncols()
        )));
    }
    let n = op.ncols();
    let samples: Vec<f64> = (0..probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(derive_seed(seed, i as u64), streams::PROBE);
            let z = rademacher_vec(&mut rng, n);
            dot(&z, &op.apply(&z))
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / probes as f64;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (probes - 1) as f64;
    Ok((mean, (var / probes as f64).sqrt()))
}
