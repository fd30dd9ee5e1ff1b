use serde::{Deserialize, Serialize};

use crate::lanczos::{Checkpoint, LanczosStatus};
use crate::nystrom::NystromDiagnostics;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    BudgetExhausted,
    Breakdown,
}

impl From<LanczosStatus> for SolveStatus {
    fn from(s: LanczosStatus) -> Self {
        match s {
            LanczosStatus::Converged | LanczosStatus::Running => SolveStatus::Converged,
            LanczosStatus::BudgetExhausted => SolveStatus::BudgetExhausted,
            LanczosStatus::Breakdown => SolveStatus::Breakdown,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub level1: usize,
    pub level2_total: usize,
    pub level3a_total: usize,
    pub level3b_total: usize,
}

/// Solution plus diagnostics of one solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: u32,
    pub method: String,
    pub status: SolveStatus,
    #[serde(skip)]
    pub x: Vec<f64>,
    pub iterations: IterationCounts,
    /// Products with the input matrix (or its transpose).
    pub matvecs: usize,
    pub residual_history: Vec<Checkpoint>,
    /// Explicit `|K x - b| / |b|` for the system actually solved.
    pub final_residual: f64,
    pub kappa_m_estimate: Option<f64>,
    pub wall_ms: f64,
    /// Which iteration bound ended level 1: `"tolerance"`, `"budget"`, `"hard-cap"`, `"breakdown"`.
    pub binding_bound: String,
    pub flags: Vec<String>,
    pub preconditioner: Option<NystromDiagnostics>,
    pub config: serde_json::Value,
}

impl SolveReport {
    pub fn new(method: &str, n: usize) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            method: method.to_string(),
            status: SolveStatus::Converged,
            x: vec![0.0; n],
            iterations: IterationCounts::default(),
            matvecs: 0,
            residual_history: Vec::new(),
            final_residual: 0.0,
            kappa_m_estimate: None,
            wall_ms: 0.0,
            binding_bound: "tolerance".into(),
            flags: Vec::new(),
            preconditioner: None,
            config: serde_json::Value::Null,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn flag(&mut self, f: impl Into<String>) {
        let f = f.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON including the solution vector.
    pub fn to_json_with_solution(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["solution"] = serde_json::json!(self.x);
        v
    }
}
