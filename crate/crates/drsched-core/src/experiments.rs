//! Baselines, parameter sweeps and the gap metric.

use std::path::Path;
use std::time::Instant;

use conic::{solve, ConicProgram, LinExpr, SolveStatus, SolverOptions};

use crate::dr_admm::{admm_solve, partition_case, region_pricing, ADMMConfig};
use crate::dr_exact::{build_exact_sdp, extract_solution, ExtractOptions};
use crate::dr_split::{build_split_sdp, extract_split_solution, make_split_plan};
use crate::pricing::{
    ambiguity_params, effective_sample_size, estimate_moments, support_box, ScenarioSet,
    SupportBox,
};
use crate::system_model::{
    add_schedule_constraints, evaluate_profit, NetworkCase, ScheduleDecision, ScheduleVars,
};
use crate::ModelError;

/// Maximizes `P'lambda - 1'z` over the feasible set at a fixed price.
/// The reported objective is the negated profit (a loss, for table
/// consistency with the risk models); the decision's profit field is the
/// profit at `lambda`.
pub fn run_deterministic(
    case: &NetworkCase,
    segments: usize,
    lambda: &[f64],
    opts: &SolverOptions,
) -> Result<ScheduleDecision, ModelError> {
    if lambda.len() != case.price_dim() {
        return Err(ModelError::Parameter(format!(
            "price vector has {} entries, case needs {}",
            lambda.len(),
            case.price_dim()
        )));
    }
    let mut pb = ConicProgram::new();
    let vars = ScheduleVars::create(&mut pb, case);
    add_schedule_constraints(&mut pb, case, segments, &vars)?;
    let p_gen = vars.p_gen_flat(case);
    let z = vars.z_flat();
    let mut obj = LinExpr::new();
    for (k, &pv) in p_gen.iter().enumerate() {
        obj.add_term(pv, -lambda[k]);
    }
    for &zv in &z {
        obj.add_term(zv, 1.0);
    }
    pb.set_objective(obj);
    let sol = solve(&pb, opts)?;
    if sol.status != SolveStatus::Optimal {
        return Err(crate::dr_exact::solve_failed(sol.status, &sol.residuals));
    }
    let p_flat: Vec<f64> = p_gen.iter().map(|v| sol.x[v.idx()]).collect();
    let z_flat: Vec<f64> = z.iter().map(|v| sol.x[v.idx()]).collect();
    let profit = evaluate_profit(&p_flat, &z_flat, lambda)?;
    Ok(ScheduleDecision {
        p: (0..case.n_gens())
            .map(|g| p_flat[g * case.horizon..(g + 1) * case.horizon].to_vec())
            .collect(),
        theta: vars.theta.iter().map(|row| row.iter().map(|v| sol.x[v.idx()]).collect()).collect(),
        z: (0..case.n_gens())
            .map(|g| z_flat[g * case.horizon..(g + 1) * case.horizon].to_vec())
            .collect(),
        alpha: 0.0,
        objective: -profit,
        profit,
    })
}

/// Simplified box-robust baseline: because outputs are nonnegative, the
/// box worst case of `P'lambda - 1'z` is attained at the lower price
/// corner, so the maximin schedule is the deterministic LP at `lambda^-`.
/// Outputs are labeled `ro_simplified`; this is not the full CVaR-robust
/// counterpart from the literature.
pub fn run_ro_baseline(
    case: &NetworkCase,
    segments: usize,
    support: &SupportBox,
    opts: &SolverOptions,
) -> Result<ScheduleDecision, ModelError> {
    run_deterministic(case, segments, &support.lambda_minus, opts)
}

/// `|p_dro - p_app| / p_dro`.
pub fn gap_metric(p_dro: f64, p_app: f64) -> Result<f64, ModelError> {
    if p_dro == 0.0 {
        return Err(ModelError::Parameter("gap metric undefined: reference profit is zero".into()));
    }
    Ok((p_dro - p_app).abs() / p_dro)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Exact,
    Split,
    Admm,
    Ro,
    Det,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Self::Exact),
            "split" => Some(Self::Split),
            "admm" => Some(Self::Admm),
            "ro" => Some(Self::Ro),
            "det" => Some(Self::Det),
            _ => None,
        }
    }

    /// Label used in reports; the RO baseline is explicitly marked as the
    /// simplified variant.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Split => "split",
            Self::Admm => "admm",
            Self::Ro => "ro_simplified",
            Self::Det => "det",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub segments: usize,
    pub pieces: usize,
    pub partition: Option<Vec<usize>>,
    pub admm: ADMMConfig,
    pub solver: SolverOptions,
    /// Substitute the documented effective sample size when the actual
    /// count cannot certify the confidence parameters.
    pub effective_m: bool,
    pub extract: ExtractOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            segments: 10,
            pieces: 2,
            partition: None,
            admm: ADMMConfig::default(),
            solver: SolverOptions::default(),
            effective_m: true,
            extract: ExtractOptions::default(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub beta: f64,
    pub model: String,
    pub objective: f64,
    pub profit: f64,
    /// Profit against the lower price corner of the support box.
    pub worst_profit: f64,
    pub wall_s: f64,
    pub status: String,
    /// True when the ambiguity parameters used the effective sample size.
    pub effective_m: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| ModelError::Parameter(format!("csv: {e}")))?;
        w.write_record([
            "delta",
            "beta",
            "model",
            "objective",
            "profit",
            "worst_profit",
            "wall_s",
            "status",
            "effective_m",
        ])
        .map_err(|e| ModelError::Parameter(format!("csv: {e}")))?;
        for row in &self.rows {
            w.write_record([
                format!("{}", row.delta),
                format!("{}", row.beta),
                row.model.clone(),
                format!("{:.6}", row.objective),
                format!("{:.6}", row.profit),
                format!("{:.6}", row.worst_profit),
                format!("{:.3}", row.wall_s),
                row.status.clone(),
                row.effective_m.to_string(),
            ])
            .map_err(|e| ModelError::Parameter(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| ModelError::Parameter(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Runs one model cell of the sweep. Returns the decision and whether the
/// effective sample size had to stand in for the actual one.
pub fn run_model_cell(
    case: &NetworkCase,
    set: &ScenarioSet,
    delta: f64,
    beta: f64,
    model: ModelKind,
    opts: &SweepOptions,
) -> Result<(ScheduleDecision, bool), ModelError> {
    let moments = estimate_moments(set, None).map_err(ModelError::Pricing)?;
    let support = support_box(set).map_err(ModelError::Pricing)?;
    let mu: Vec<f64> = moments.mu.iter().copied().collect();

    let mut used_effective = false;
    let mut params_for = || -> Result<crate::pricing::AmbiguityParams, ModelError> {
        let m_actual = set.n_samples();
        match ambiguity_params(&moments, &support, delta, m_actual) {
            Ok(p) => Ok(p),
            Err(_) if opts.effective_m => {
                used_effective = true;
                let m_eff = effective_sample_size(&moments, &support, delta, m_actual);
                ambiguity_params(&moments, &support, delta, m_eff).map_err(ModelError::Pricing)
            }
            Err(e) => Err(ModelError::Pricing(e)),
        }
    };

    let decision = match model {
        ModelKind::Det => run_deterministic(case, opts.segments, &mu, &opts.solver)?,
        ModelKind::Ro => run_ro_baseline(case, opts.segments, &support, &opts.solver)?,
        ModelKind::Exact => {
            let params = params_for()?;
            let handle = build_exact_sdp(case, opts.segments, &moments, &support, &params, beta)?;
            let sol = solve(&handle.program, &opts.solver)?;
            let (d, _) =
                extract_solution(&handle, &sol, &moments, case, opts.segments, &opts.extract)?;
            d
        }
        ModelKind::Split => {
            let params = params_for()?;
            let plan = make_split_plan(case.price_dim(), opts.pieces)?;
            let handle =
                build_split_sdp(case, opts.segments, &moments, &support, &params, beta, &plan)?;
            let sol = solve(&handle.program, &opts.solver)?;
            let (d, _) =
                extract_split_solution(&handle, &sol, &moments, case, opts.segments, &opts.extract)?;
            d
        }
        ModelKind::Admm => {
            let assignment = opts
                .partition
                .clone()
                .ok_or_else(|| ModelError::Parameter("admm model needs a partition".into()))?;
            let partition = partition_case(case, &assignment)
                .map_err(|e| ModelError::Parameter(e.to_string()))?;
            let data = region_pricing(set, case, &partition, delta, opts.effective_m)
                .map_err(ModelError::Pricing)?;
            used_effective = opts.effective_m;
            let out =
                admm_solve(case, &partition, &data, opts.segments, beta, &opts.admm, &mu)
                    .map_err(|e| ModelError::Parameter(e.to_string()))?;
            out.decision
        }
    };
    Ok((decision, used_effective))
}

/// Runs the full pipeline for every `(delta, beta, model)` combination.
/// Individual cell failures are recorded in the status column and do not
/// abort the sweep. Rows are ordered by the iteration order of the inputs.
pub fn sweep(
    case: &NetworkCase,
    set: &ScenarioSet,
    deltas: &[f64],
    betas: &[f64],
    models: &[ModelKind],
    opts: &SweepOptions,
) -> Result<SweepResult, ModelError> {
    if deltas.is_empty() || betas.is_empty() || models.is_empty() {
        return Err(ModelError::Parameter("sweep needs nonempty deltas, betas and models".into()));
    }
    let moments = estimate_moments(set, None).map_err(ModelError::Pricing)?;
    let support = support_box(set).map_err(ModelError::Pricing)?;
    let mu: Vec<f64> = moments.mu.iter().copied().collect();
    let mut rows = Vec::new();
    for &delta in deltas {
        for &beta in betas {
            for &model in models {
                let started = Instant::now();
                let outcome = run_model_cell(case, set, delta, beta, model, opts);
                let wall = started.elapsed().as_secs_f64();
                let row = match outcome {
                    Ok((d, eff)) => {
                        let p_flat = d.p_flat();
                        let z_flat = d.z_flat();
                        let profit_mu = evaluate_profit(&p_flat, &z_flat, &mu)?;
                        let worst = evaluate_profit(&p_flat, &z_flat, &support.lambda_minus)?;
                        SweepRow {
                            delta,
                            beta,
                            model: model.label().to_string(),
                            objective: d.objective,
                            profit: profit_mu,
                            worst_profit: worst,
                            wall_s: wall,
                            status: "optimal".into(),
                            effective_m: eff,
                        }
                    }
                    Err(e) => SweepRow {
                        delta,
                        beta,
                        model: model.label().to_string(),
                        objective: f64::NAN,
                        profit: f64::NAN,
                        worst_profit: f64::NAN,
                        wall_s: wall,
                        status: format!("error: {e}"),
                        effective_m: false,
                    },
                };
                rows.push(row);
            }
        }
    }
    Ok(SweepResult { rows })
}
