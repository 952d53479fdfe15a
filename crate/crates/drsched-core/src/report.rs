//! Solution report serialization (JSON).

use std::path::Path;

use serde::Serialize;

use crate::dr_exact::ExtractDiagnostics;
use crate::system_model::ScheduleDecision;
use crate::ModelError;

#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    pub model: String,
    pub status: String,
    /// Worst-case CVaR for the robust models; negated profit for baselines.
    pub objective: f64,
    /// Profit at the reporting price (estimated mean).
    pub profit: f64,
    pub alpha: f64,
    /// Per-unit schedules, `n_gens x horizon`.
    pub schedule_mw: Vec<Vec<f64>>,
    pub cost_epigraph: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ExtractDiagnostics>,
    /// Piece sizes for the split model (echoed back).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admm_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admm_converged: Option<bool>,
}

impl SolutionReport {
    pub fn new(model: &str, decision: &ScheduleDecision) -> Self {
        Self {
            model: model.to_string(),
            status: "optimal".into(),
            objective: decision.objective,
            profit: decision.profit,
            alpha: decision.alpha,
            schedule_mw: decision.p.clone(),
            cost_epigraph: decision.z.clone(),
            diagnostics: None,
            split_sizes: None,
            admm_iterations: None,
            admm_converged: None,
        }
    }

    pub fn with_diagnostics(mut self, d: ExtractDiagnostics) -> Self {
        self.diagnostics = Some(d);
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), ModelError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| ModelError::Parameter(format!("report: {e}")))?;
        std::fs::write(path, text).map_err(|e| ModelError::Parameter(format!("report: {e}")))?;
        Ok(())
    }
}
