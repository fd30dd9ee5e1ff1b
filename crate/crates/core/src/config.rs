//! Tunable constants. The defaults are the calibrated values; every one of them can be
//! overridden from a TOML `key = value` file (see [`MspConfig::from_toml_str`]).

use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MspConfig {
    /// `s = min(n, ceil(sketch_factor * l * ln(max(l/delta, e))))`
    pub sketch_factor: f64,
    pub gamma_min: usize,
    pub gamma_max: usize,
    /// OSE rows `phi = ceil(ose_c * (d + ln(1/delta)) / eps^2)`
    pub ose_c: f64,
    pub ose_eps: f64,
    /// Hutchinson probes for the tail-trace estimate behind `lambda_0`.
    pub lambda0_probes: usize,
    /// Initial and maximal core-matrix jitter, relative to `tr(W)/s`.
    pub jitter_start: f64,
    pub jitter_max: f64,
    /// Level-1 budget `ceil(budget_c * sqrt(kappa) * ln(kappa / eps))`.
    pub budget_c: f64,
    pub warmup_iters: usize,
    pub check_every: usize,
    /// Multiplier on `ln(kappa / eps)` for inner (level-2/3) iteration caps.
    pub inner_budget_c: f64,
    /// Floor applied to all derived inner tolerances.
    pub inner_eps_floor: f64,
    /// Inflation applied to Ritz-value condition-number estimates.
    pub ritz_inflation: f64,
    /// Hard cap on level-1 iterations regardless of the adaptive budget.
    pub max_outer_iters: usize,
}

impl Default for MspConfig {
    fn default() -> Self {
        Self {
            sketch_factor: 1.5,
            gamma_min: 2,
            gamma_max: 8,
            ose_c: 4.0,
            ose_eps: 0.5,
            lambda0_probes: 20,
            jitter_start: 1e-12,
            jitter_max: 1e-6,
            budget_c: 4.0,
            warmup_iters: 10,
            check_every: 10,
            inner_budget_c: 4.0,
            inner_eps_floor: 1e-14,
            ritz_inflation: 2.0,
            max_outer_iters: 5000,
        }
    }
}

impl MspConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| MspError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(MspError::Domain(format!("config: {msg}")));
        if !(self.sketch_factor > 0.0) {
            return bad("sketch_factor must be positive");
        }
        if self.gamma_min == 0 || self.gamma_min > self.gamma_max {
            return bad("need 1 <= gamma_min <= gamma_max");
        }
        if !(self.ose_c > 0.0) || !(self.ose_eps > 0.0 && self.ose_eps <= 0.5) {
            return bad("ose_c must be positive and ose_eps in (0, 1/2]");
        }
        if self.lambda0_probes == 0 {
            return bad("lambda0_probes must be >= 1");
        }
        if !(self.jitter_start > 0.0 && self.jitter_start <= self.jitter_max) {
            return bad("need 0 < jitter_start <= jitter_max");
        }
        if self.check_every == 0 || self.warmup_iters == 0 {
            return bad("check_every and warmup_iters must be >= 1");
        }
        Ok(())
    }

    fn log_term(l: usize, delta: f64) -> f64 {
        (l as f64 / delta).max(std::f64::consts::E).ln()
    }

    /// Sparse-embedding row count for target rank `l`.
    pub fn sketch_rows(&self, n: usize, l: usize, delta: f64) -> usize {
        let s = (self.sketch_factor * l as f64 * Self::log_term(l, delta)).ceil() as usize;
        s.clamp(1, n.max(1))
    }

    /// Nonzeros per sparse-embedding column for target rank `l`.
    pub fn sketch_gamma(&self, l: usize, delta: f64) -> usize {
        (Self::log_term(l, delta).ceil() as usize).clamp(self.gamma_min, self.gamma_max)
    }
}
