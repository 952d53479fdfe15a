//! Physical system model: network cases, the DC self-scheduling feasible
//! set as linear constraints, and profit evaluation.
//!
//! The feasible set couples, per period: two-sided bus balance rows against
//! the admittance matrix, line flow limits, the reference-bus pin, zero
//! output on non-generator buses, generator capacity boxes, ramp coupling
//! between consecutive periods, and tangent under-estimator cuts replacing
//! each quadratic production cost with an epigraph variable `z`.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use conic::{ConicProgram, LinExpr, RowId, Sense, VarId};

use crate::CaseError;

/// One generating unit. Quadratic production cost `a + b P + c P^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Bus the unit sits on (0-based).
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub p_initial: Option<f64>,
}

impl GeneratorSpec {
    pub fn cost(&self, p: f64) -> f64 {
        self.a + self.b * p + self.c * p * p
    }

    fn validate(&self, n_buses: usize, k: usize) -> Result<(), CaseError> {
        if self.bus >= n_buses {
            return Err(CaseError::Validation(format!(
                "generator {k}: bus {} out of range (N = {n_buses})",
                self.bus + 1
            )));
        }
        if self.p_min > self.p_max {
            return Err(CaseError::Validation(format!(
                "generator {k}: p_min {} > p_max {}",
                self.p_min, self.p_max
            )));
        }
        if self.c < 0.0 {
            return Err(CaseError::Validation(format!("generator {k}: c < 0")));
        }
        if self.ramp_up < 0.0 || self.ramp_down < 0.0 {
            return Err(CaseError::Validation(format!("generator {k}: negative ramp limit")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Line {
    /// Endpoints, 0-based.
    pub from: usize,
    pub to: usize,
    /// Reactance (per unit), must be positive.
    pub x: f64,
    /// Flow limit in MW; `None` means unlimited.
    pub fmax: Option<f64>,
}

/// A physical instance: buses, lines, units, loads and the horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub n_buses: usize,
    pub lines: Vec<Line>,
    pub generators: Vec<GeneratorSpec>,
    /// Load table, `n_buses x horizon`, MW.
    pub loads: Vec<Vec<f64>>,
    /// Reference bus (0-based); exactly one.
    pub ref_bus: usize,
    pub horizon: usize,
}

impl NetworkCase {
    pub fn n_gens(&self) -> usize {
        self.generators.len()
    }

    /// Dimension of the price vector: units x periods.
    pub fn price_dim(&self) -> usize {
        self.generators.len() * self.horizon
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        if self.n_buses == 0 {
            return Err(CaseError::Validation("case has no buses".into()));
        }
        if self.horizon == 0 {
            return Err(CaseError::Validation("horizon is zero".into()));
        }
        if self.ref_bus >= self.n_buses {
            return Err(CaseError::Validation(format!(
                "reference bus {} out of range",
                self.ref_bus + 1
            )));
        }
        for (k, l) in self.lines.iter().enumerate() {
            if l.from >= self.n_buses || l.to >= self.n_buses {
                return Err(CaseError::Validation(format!("line {k}: endpoint out of range")));
            }
            if l.from == l.to {
                return Err(CaseError::Validation(format!("line {k}: self-loop")));
            }
            if l.x <= 0.0 {
                return Err(CaseError::Validation(format!("line {k}: reactance must be > 0")));
            }
            if let Some(f) = l.fmax {
                if f < 0.0 {
                    return Err(CaseError::Validation(format!("line {k}: negative flow limit")));
                }
            }
        }
        let mut seen = HashSet::new();
        for (k, g) in self.generators.iter().enumerate() {
            g.validate(self.n_buses, k)?;
            if !seen.insert(g.bus) {
                return Err(CaseError::Validation(format!(
                    "generator {k}: duplicate generator bus {}",
                    g.bus + 1
                )));
            }
        }
        if self.loads.len() != self.n_buses {
            return Err(CaseError::Validation(format!(
                "loads has {} rows, expected {}",
                self.loads.len(),
                self.n_buses
            )));
        }
        for (i, row) in self.loads.iter().enumerate() {
            if row.len() != self.horizon {
                return Err(CaseError::Validation(format!(
                    "loads row {} has {} entries, expected horizon {}",
                    i + 1,
                    row.len(),
                    self.horizon
                )));
            }
            if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(CaseError::Validation(format!("loads row {} has a bad entry", i + 1)));
            }
        }
        Ok(())
    }
}

// --- case file schema ------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RefBusField {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Deserialize)]
struct LineFile {
    from: usize,
    to: usize,
    x: f64,
    #[serde(default)]
    fmax: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct GenFile {
    bus: usize,
    pmin: f64,
    pmax: f64,
    a: f64,
    b: f64,
    c: f64,
    rup: f64,
    rdn: f64,
    #[serde(default)]
    p0: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct CaseFile {
    #[serde(default)]
    name: Option<String>,
    buses: usize,
    lines: Vec<LineFile>,
    generators: Vec<GenFile>,
    loads: Vec<Vec<f64>>,
    ref_bus: RefBusField,
    horizon: usize,
}

/// Parses and validates a case file (JSON schema with 1-based bus ids).
pub fn parse_case(path: &Path) -> Result<NetworkCase, CaseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CaseError::Io(format!("{}: {e}", path.display())))?;
    parse_case_str(&text, path.file_stem().and_then(|s| s.to_str()).unwrap_or("case"))
}

pub fn parse_case_str(text: &str, default_name: &str) -> Result<NetworkCase, CaseError> {
    let file: CaseFile =
        serde_json::from_str(text).map_err(|e| CaseError::Schema(e.to_string()))?;
    let ref_bus = match file.ref_bus {
        RefBusField::One(b) => b,
        RefBusField::Many(v) => {
            let distinct: HashSet<_> = v.iter().collect();
            if distinct.len() != 1 {
                return Err(CaseError::Validation(format!(
                    "exactly one reference bus required, got {v:?}"
                )));
            }
            v[0]
        }
    };
    let to_zero = |b: usize, what: &str| -> Result<usize, CaseError> {
        if b == 0 || b > file.buses {
            Err(CaseError::Validation(format!("{what}: bus id {b} out of range 1..={}", file.buses)))
        } else {
            Ok(b - 1)
        }
    };
    let case = NetworkCase {
        name: file.name.unwrap_or_else(|| default_name.to_string()),
        n_buses: file.buses,
        lines: file
            .lines
            .iter()
            .enumerate()
            .map(|(k, l)| {
                Ok(Line {
                    from: to_zero(l.from, &format!("line {k}"))?,
                    to: to_zero(l.to, &format!("line {k}"))?,
                    x: l.x,
                    fmax: l.fmax,
                })
            })
            .collect::<Result<_, CaseError>>()?,
        generators: file
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| {
                Ok(GeneratorSpec {
                    bus: to_zero(g.bus, &format!("generator {k}"))?,
                    p_min: g.pmin,
                    p_max: g.pmax,
                    a: g.a,
                    b: g.b,
                    c: g.c,
                    ramp_up: g.rup,
                    ramp_down: g.rdn,
                    p_initial: g.p0,
                })
            })
            .collect::<Result<_, CaseError>>()?,
        loads: file.loads,
        ref_bus: to_zero(ref_bus, "ref_bus")?,
        horizon: file.horizon,
    };
    case.validate()?;
    Ok(case)
}

// --- admittance ------------------------------------------------------------

/// DC network admittance matrix: `B_ij = -1/x_ij` on lines, diagonals are
/// the negated row sums so every row sums to zero.
pub fn admittance_matrix(case: &NetworkCase) -> Result<DMatrix<f64>, CaseError> {
    let n = case.n_buses;
    let mut b = DMatrix::zeros(n, n);
    for (k, l) in case.lines.iter().enumerate() {
        if l.x <= 0.0 {
            return Err(CaseError::SingularLine(k));
        }
        let y = 1.0 / l.x;
        b[(l.from, l.to)] -= y;
        b[(l.to, l.from)] -= y;
        b[(l.from, l.from)] += y;
        b[(l.to, l.to)] += y;
    }
    Ok(b)
}

// --- piecewise cost --------------------------------------------------------

/// Tangent cuts under-estimating the quadratic cost of a unit.
///
/// The `L` tangent points sit at the midpoints of `L` equal subintervals of
/// `[p_min, p_max]`, so the maximum under-estimation gap over the whole
/// operating range is `c ((p_max - p_min)/L)^2 / 4`, attained at the
/// interval edges. Returns `(slope, intercept)` pairs: `z >= slope P +
/// intercept`.
pub fn cost_cuts(gen: &GeneratorSpec, segments: usize) -> Result<Vec<(f64, f64)>, CaseError> {
    if segments == 0 {
        return Err(CaseError::Parameter("segment count L must be >= 1".into()));
    }
    let h = (gen.p_max - gen.p_min) / segments as f64;
    Ok((0..segments)
        .map(|l| {
            let p = gen.p_min + (l as f64 + 0.5) * h;
            (2.0 * gen.c * p + gen.b, gen.a - gen.c * p * p)
        })
        .collect())
}

/// Value of the piecewise model: the tightest lower bound on cost at `p`.
pub fn max_cut_value(cuts: &[(f64, f64)], p: f64) -> f64 {
    cuts.iter().map(|(s, i)| s * p + i).fold(f64::NEG_INFINITY, f64::max)
}

// --- constraint building ---------------------------------------------------

/// Decision-variable blocks of the self-scheduling feasible set.
///
/// `p` spans all buses (non-generator rows are pinned to zero by equality
/// rows), `theta` spans all buses, `z` spans generators only.
#[derive(Debug, Clone)]
pub struct ScheduleVars {
    /// `n_buses x horizon`.
    pub p: Vec<Vec<VarId>>,
    /// `n_buses x horizon`.
    pub theta: Vec<Vec<VarId>>,
    /// `n_gens x horizon`.
    pub z: Vec<Vec<VarId>>,
}

impl ScheduleVars {
    pub fn create(pb: &mut ConicProgram, case: &NetworkCase) -> Self {
        let n = case.n_buses;
        let t = case.horizon;
        let mk = |pb: &mut ConicProgram, rows: usize| -> Vec<Vec<VarId>> {
            (0..rows).map(|_| pb.add_vars(t)).collect()
        };
        let p = mk(pb, n);
        let theta = mk(pb, n);
        let z = mk(pb, case.n_gens());
        Self { p, theta, z }
    }

    /// Generator outputs flattened unit-major: index `g * horizon + t`.
    pub fn p_gen_flat(&self, case: &NetworkCase) -> Vec<VarId> {
        let mut out = Vec::with_capacity(case.price_dim());
        for g in &case.generators {
            out.extend(self.p[g.bus].iter().copied());
        }
        out
    }

    pub fn z_flat(&self) -> Vec<VarId> {
        self.z.iter().flat_map(|r| r.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    FlowBalance,
    LineLimit,
    RefBus,
    NonGenZero,
    GenBound,
    Ramp,
    CostCut,
}

/// Per-category accounting of emitted rows, used by audits and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct ConstraintAudit {
    pub rows: Vec<(ConstraintKind, RowId)>,
}

impl ConstraintAudit {
    fn push(&mut self, kind: ConstraintKind, id: RowId) {
        self.rows.push((kind, id));
    }

    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.rows.iter().filter(|(k, _)| *k == kind).count()
    }

    pub fn total(&self) -> usize {
        self.rows.len()
    }
}

/// Emits the self-scheduling feasible set over `(P, theta, z)`.
///
/// Balance rows are the two-sided per-bus inequalities
/// `0 <= P_it - sum_j B_ij theta_jt <= D_it` (the schedule may serve any part
/// of the local demand, never more). Ramp rows couple consecutive periods;
/// when a unit has no stated initial output they start at the second period.
pub fn add_schedule_constraints(
    pb: &mut ConicProgram,
    case: &NetworkCase,
    segments: usize,
    vars: &ScheduleVars,
) -> Result<ConstraintAudit, CaseError> {
    add_network_constraints(pb, case, segments, vars, BalanceForm::TwoSided).map(|(a, _)| a)
}

/// Balance-row style: the self-scheduling two-sided form or the
/// demand-serving equality used to price the base dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceForm {
    TwoSided,
    ServeDemand,
}

/// Shared emitter. Returns the audit and the balance row ids
/// (`n_buses x horizon`; for the two-sided form these are the lower rows).
pub fn add_network_constraints(
    pb: &mut ConicProgram,
    case: &NetworkCase,
    segments: usize,
    vars: &ScheduleVars,
    form: BalanceForm,
) -> Result<(ConstraintAudit, Vec<Vec<RowId>>), CaseError> {
    case.validate()?;
    if segments == 0 {
        return Err(CaseError::Parameter("segment count L must be >= 1".into()));
    }
    let n = case.n_buses;
    let horizon = case.horizon;
    let bmat = admittance_matrix(case)?;
    let mut audit = ConstraintAudit::default();
    let mut balance_rows = vec![Vec::with_capacity(horizon); n];
    let gen_at_bus: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (g, gen) in case.generators.iter().enumerate() {
            v[gen.bus] = Some(g);
        }
        v
    };

    for t in 0..horizon {
        // Eq. (3): bus balance, two-sided (or equality for pricing runs).
        for i in 0..n {
            let mut expr = LinExpr::var(vars.p[i][t]);
            for j in 0..n {
                let bij = bmat[(i, j)];
                if bij != 0.0 {
                    expr.add_term(vars.theta[j][t], -bij);
                }
            }
            match form {
                BalanceForm::TwoSided => {
                    let lo = pb.add_row(expr.clone(), Sense::Ge, 0.0);
                    audit.push(ConstraintKind::FlowBalance, lo);
                    let hi = pb.add_row(expr, Sense::Le, case.loads[i][t]);
                    audit.push(ConstraintKind::FlowBalance, hi);
                    balance_rows[i].push(lo);
                }
                BalanceForm::ServeDemand => {
                    let eq = pb.add_row(expr, Sense::Eq, case.loads[i][t]);
                    audit.push(ConstraintKind::FlowBalance, eq);
                    balance_rows[i].push(eq);
                }
            }
        }
        // Eq. (4): line flow limits (vacuous when fmax is unlimited).
        for l in &case.lines {
            if let Some(fmax) = l.fmax {
                let flow = LinExpr::new()
                    .plus(vars.theta[l.from][t], 1.0 / l.x)
                    .plus(vars.theta[l.to][t], -1.0 / l.x);
                let a = pb.add_row(flow.clone(), Sense::Le, fmax);
                let b = pb.add_row(flow, Sense::Ge, -fmax);
                audit.push(ConstraintKind::LineLimit, a);
                audit.push(ConstraintKind::LineLimit, b);
            }
        }
        // Eq. (5): reference bus.
        let r = pb.add_row(LinExpr::var(vars.theta[case.ref_bus][t]), Sense::Eq, 0.0);
        audit.push(ConstraintKind::RefBus, r);
        // Eq. (6): no output on buses without units.
        for i in 0..n {
            if gen_at_bus[i].is_none() {
                let row = pb.add_row(LinExpr::var(vars.p[i][t]), Sense::Eq, 0.0);
                audit.push(ConstraintKind::NonGenZero, row);
            }
        }
        // Eq. (7): capacity box.
        for gen in &case.generators {
            let lo = pb.add_row(LinExpr::var(vars.p[gen.bus][t]), Sense::Ge, gen.p_min);
            let hi = pb.add_row(LinExpr::var(vars.p[gen.bus][t]), Sense::Le, gen.p_max);
            audit.push(ConstraintKind::GenBound, lo);
            audit.push(ConstraintKind::GenBound, hi);
        }
    }

    // Eqs. (8)-(9): ramps between consecutive periods; against the stated
    // initial output at t = 1 when present.
    for gen in case.generators.iter() {
        if let Some(p0) = gen.p_initial {
            let up = pb.add_row(LinExpr::var(vars.p[gen.bus][0]), Sense::Le, p0 + gen.ramp_up);
            let dn = pb.add_row(LinExpr::var(vars.p[gen.bus][0]), Sense::Ge, p0 - gen.ramp_down);
            audit.push(ConstraintKind::Ramp, up);
            audit.push(ConstraintKind::Ramp, dn);
        }
        for t in 1..horizon {
            let diff = LinExpr::new()
                .plus(vars.p[gen.bus][t], 1.0)
                .plus(vars.p[gen.bus][t - 1], -1.0);
            let up = pb.add_row(diff.clone(), Sense::Le, gen.ramp_up);
            let dn = pb.add_row(diff, Sense::Ge, -gen.ramp_down);
            audit.push(ConstraintKind::Ramp, up);
            audit.push(ConstraintKind::Ramp, dn);
        }
    }

    // Eq. (10): tangent cuts for each unit and period.
    for (g, gen) in case.generators.iter().enumerate() {
        let cuts = cost_cuts(gen, segments)?;
        for t in 0..horizon {
            for &(slope, intercept) in &cuts {
                let row = pb.add_row(
                    LinExpr::new().plus(vars.z[g][t], 1.0).plus(vars.p[gen.bus][t], -slope),
                    Sense::Ge,
                    intercept,
                );
                audit.push(ConstraintKind::CostCut, row);
            }
        }
    }

    Ok((audit, balance_rows))
}

// --- profit and feasibility checks ------------------------------------------

/// `P' lambda - 1' z`, all three flattened unit-major (`g * T + t`).
pub fn evaluate_profit(p: &[f64], z: &[f64], lambda: &[f64]) -> Result<f64, CaseError> {
    if p.len() != lambda.len() || p.len() != z.len() {
        return Err(CaseError::Parameter(format!(
            "shape mismatch: |P| = {}, |z| = {}, |lambda| = {}",
            p.len(),
            z.len(),
            lambda.len()
        )));
    }
    let revenue: f64 = p.iter().zip(lambda).map(|(a, b)| a * b).sum();
    let cost: f64 = z.iter().sum();
    Ok(revenue - cost)
}

/// The recovered strategy of one model run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleDecision {
    /// Unit outputs, `n_gens x horizon`, MW.
    pub p: Vec<Vec<f64>>,
    /// Bus angles, `n_buses x horizon`, rad.
    pub theta: Vec<Vec<f64>>,
    /// Cost epigraph values, `n_gens x horizon`, $.
    pub z: Vec<Vec<f64>>,
    /// VaR threshold ($); zero for models without a risk term.
    pub alpha: f64,
    /// Model objective ($): worst-case CVaR for the robust models,
    /// negated profit for the LP baselines.
    pub objective: f64,
    /// Profit ($) at the reporting price (the estimated mean).
    pub profit: f64,
}

impl ScheduleDecision {
    pub fn p_flat(&self) -> Vec<f64> {
        self.p.iter().flatten().copied().collect()
    }

    pub fn z_flat(&self) -> Vec<f64> {
        self.z.iter().flatten().copied().collect()
    }
}

/// Worst violation of each constraint family at a candidate schedule.
/// Non-generator buses are taken as producing exactly zero.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScheduleResiduals {
    pub flow_balance: f64,
    pub line: f64,
    pub ref_bus: f64,
    pub bounds: f64,
    pub ramp: f64,
    pub cuts: f64,
}

impl ScheduleResiduals {
    pub fn max(&self) -> f64 {
        [self.flow_balance, self.line, self.ref_bus, self.bounds, self.ramp, self.cuts]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn schedule_residuals(
    case: &NetworkCase,
    segments: usize,
    decision: &ScheduleDecision,
) -> Result<ScheduleResiduals, CaseError> {
    let n = case.n_buses;
    let horizon = case.horizon;
    if decision.p.len() != case.n_gens()
        || decision.theta.len() != n
        || decision.z.len() != case.n_gens()
    {
        return Err(CaseError::Parameter("decision shapes do not match the case".into()));
    }
    let bmat = admittance_matrix(case)?;
    let mut res = ScheduleResiduals::default();
    let mut p_bus = vec![vec![0.0; horizon]; n];
    for (g, gen) in case.generators.iter().enumerate() {
        for t in 0..horizon {
            p_bus[gen.bus][t] = decision.p[g][t];
        }
    }
    for t in 0..horizon {
        for i in 0..n {
            let mut net = p_bus[i][t];
            for j in 0..n {
                net -= bmat[(i, j)] * decision.theta[j][t];
            }
            res.flow_balance = res.flow_balance.max(-net).max(net - case.loads[i][t]);
        }
        for l in &case.lines {
            if let Some(fmax) = l.fmax {
                let flow = (decision.theta[l.from][t] - decision.theta[l.to][t]) / l.x;
                res.line = res.line.max(flow.abs() - fmax);
            }
        }
        res.ref_bus = res.ref_bus.max(decision.theta[case.ref_bus][t].abs());
        for (g, gen) in case.generators.iter().enumerate() {
            let p = decision.p[g][t];
            res.bounds = res.bounds.max(gen.p_min - p).max(p - gen.p_max);
        }
    }
    for (g, gen) in case.generators.iter().enumerate() {
        let cuts = cost_cuts(gen, segments)?;
        for t in 0..horizon {
            if t == 0 {
                if let Some(p0) = gen.p_initial {
                    let d = decision.p[g][0] - p0;
                    res.ramp = res.ramp.max(d - gen.ramp_up).max(-d - gen.ramp_down);
                }
            } else {
                let d = decision.p[g][t] - decision.p[g][t - 1];
                res.ramp = res.ramp.max(d - gen.ramp_up).max(-d - gen.ramp_down);
            }
            let need = max_cut_value(&cuts, decision.p[g][t]);
            res.cuts = res.cuts.max(need - decision.z[g][t]);
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture_path;
    use approx::assert_abs_diff_eq;

    fn two_bus_case(x: f64) -> NetworkCase {
        NetworkCase {
            name: "two".into(),
            n_buses: 2,
            lines: vec![Line { from: 0, to: 1, x, fmax: None }],
            generators: vec![GeneratorSpec {
                bus: 0,
                p_min: 0.0,
                p_max: 100.0,
                a: 0.0,
                b: 10.0,
                c: 0.0,
                ramp_up: 100.0,
                ramp_down: 100.0,
                p_initial: None,
            }],
            loads: vec![vec![0.0], vec![50.0]],
            ref_bus: 0,
            horizon: 1,
        }
    }

    #[test]
    fn admittance_two_bus() {
        let case = two_bus_case(0.5);
        let b = admittance_matrix(&case).unwrap();
        assert_abs_diff_eq!(b[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[(0, 1)], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[(1, 0)], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[(1, 1)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn admittance_no_lines_is_zero() {
        let mut case = two_bus_case(0.5);
        case.lines.clear();
        let b = admittance_matrix(&case).unwrap();
        assert!(b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn admittance_ring_of_three() {
        let case = NetworkCase {
            name: "ring".into(),
            n_buses: 3,
            lines: vec![
                Line { from: 0, to: 1, x: 1.0, fmax: None },
                Line { from: 1, to: 2, x: 1.0, fmax: None },
                Line { from: 2, to: 0, x: 1.0, fmax: None },
            ],
            generators: vec![],
            loads: vec![vec![0.0]; 3],
            ref_bus: 0,
            horizon: 1,
        };
        let b = admittance_matrix(&case).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(b[(i, i)], 2.0, epsilon = 1e-12);
            let row_sum: f64 = (0..3).map(|j| b[(i, j)]).sum();
            assert_abs_diff_eq!(row_sum, 0.0, epsilon = 1e-12);
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(b[(i, j)], -1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn admittance_zero_reactance_errors() {
        let case = two_bus_case(0.5);
        let mut bad = case.clone();
        bad.lines[0].x = 0.0;
        assert!(matches!(admittance_matrix(&bad), Err(CaseError::SingularLine(0))));
    }

    fn table1_gen1() -> GeneratorSpec {
        GeneratorSpec {
            bus: 0,
            p_min: 50.0,
            p_max: 200.0,
            a: 0.0,
            b: 2.00,
            c: 0.00375,
            ramp_up: 60.0,
            ramp_down: 60.0,
            p_initial: None,
        }
    }

    #[test]
    fn cost_cuts_midpoint_tangents() {
        // L = 2 on the first 6-bus unit: tangents at the midpoints 87.5 and
        // 162.5; slope 2 c p + b, intercept a - c p^2.
        let cuts = cost_cuts(&table1_gen1(), 2).unwrap();
        assert_eq!(cuts.len(), 2);
        assert_abs_diff_eq!(cuts[0].0, 2.65625, epsilon = 1e-12);
        assert_abs_diff_eq!(cuts[0].1, -28.7109375, epsilon = 1e-12);
        assert_abs_diff_eq!(cuts[1].0, 3.21875, epsilon = 1e-12);
        assert_abs_diff_eq!(cuts[1].1, -99.0234375, epsilon = 1e-12);
    }

    #[test]
    fn cost_cuts_linear_cost_is_exact() {
        let mut gen = table1_gen1();
        gen.c = 0.0;
        gen.a = 7.0;
        gen.b = 3.0;
        let cuts = cost_cuts(&gen, 5).unwrap();
        assert_eq!(cuts.len(), 5);
        for &(s, i) in &cuts {
            assert_abs_diff_eq!(s, 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(i, 7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cost_cuts_zero_segments_errors() {
        assert!(cost_cuts(&table1_gen1(), 0).is_err());
    }

    #[test]
    fn piecewise_under_approximation_grid_bound() {
        // On a dense grid: 0 <= f(P) - maxcut(P) <= c h^2/4 for every unit.
        for segments in [1usize, 2, 10] {
            for gen in [
                table1_gen1(),
                GeneratorSpec { p_min: 20.0, p_max: 80.0, c: 0.0175, b: 1.75, ..table1_gen1() },
                GeneratorSpec { p_min: 15.0, p_max: 50.0, c: 0.0625, b: 1.00, ..table1_gen1() },
            ] {
                let cuts = cost_cuts(&gen, segments).unwrap();
                let h = (gen.p_max - gen.p_min) / segments as f64;
                let bound = gen.c * h * h / 4.0;
                for k in 0..=1000 {
                    let p = gen.p_min + (gen.p_max - gen.p_min) * k as f64 / 1000.0;
                    let gap = gen.cost(p) - max_cut_value(&cuts, p);
                    assert!(gap >= -1e-9, "cut overshoots at {p}");
                    assert!(gap <= bound + 1e-9, "gap {gap} > bound {bound} at {p}");
                }
            }
        }
    }

    #[test]
    fn parse_case6_matches_table() {
        let case = parse_case(&fixture_path("case6.json")).unwrap();
        assert_eq!(case.n_buses, 6);
        assert_eq!(case.n_gens(), 3);
        assert_eq!(case.horizon, 4);
        let g1 = &case.generators[0];
        assert_eq!(g1.bus, 0);
        assert_abs_diff_eq!(g1.p_min, 50.0);
        assert_abs_diff_eq!(g1.p_max, 200.0);
        assert_abs_diff_eq!(g1.a, 0.0);
        assert_abs_diff_eq!(g1.b, 2.00);
        assert_abs_diff_eq!(g1.c, 0.00375);
        assert_eq!(case.generators[1].bus, 1);
        assert_eq!(case.generators[2].bus, 5);
    }

    #[test]
    fn parse_single_bus_case() {
        let text = r#"{ "buses": 1, "lines": [], "generators": [],
            "loads": [[5.0]], "ref_bus": 1, "horizon": 1 }"#;
        let case = parse_case_str(text, "one").unwrap();
        assert_eq!(case.n_buses, 1);
        let b = admittance_matrix(&case).unwrap();
        assert_eq!(b[(0, 0)], 0.0);
    }

    #[test]
    fn parse_rejects_inverted_bounds() {
        let text = r#"{ "buses": 1, "lines": [],
            "generators": [{"bus":1,"pmin":10,"pmax":5,"a":0,"b":1,"c":0,"rup":1,"rdn":1}],
            "loads": [[5.0]], "ref_bus": 1, "horizon": 1 }"#;
        let err = parse_case_str(text, "bad").unwrap_err();
        assert!(matches!(err, CaseError::Validation(_)), "{err}");
    }

    #[test]
    fn parse_rejects_duplicate_reference_bus() {
        let text = r#"{ "buses": 2, "lines": [{"from":1,"to":2,"x":0.1}], "generators": [],
            "loads": [[0.0],[0.0]], "ref_bus": [1, 2], "horizon": 1 }"#;
        let err = parse_case_str(text, "bad").unwrap_err();
        assert!(matches!(err, CaseError::Validation(_)), "{err}");
    }

    #[test]
    fn parse_rejects_missing_field() {
        let text = r#"{ "buses": 1, "lines": [], "generators": [],
            "loads": [[0.0]], "horizon": 1 }"#;
        let err = parse_case_str(text, "bad").unwrap_err();
        match err {
            CaseError::Schema(msg) => assert!(msg.contains("ref_bus"), "{msg}"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn constraint_count_audit_6bus() {
        // 6-bus, T = 4, L = 10: counts audited per category.
        let case = parse_case(&fixture_path("case6.json")).unwrap();
        let mut pb = conic::ConicProgram::new();
        let vars = ScheduleVars::create(&mut pb, &case);
        let audit = add_schedule_constraints(&mut pb, &case, 10, &vars).unwrap();
        let (n, t, g, l) = (6, 4, 3, case.lines.len());
        assert_eq!(audit.count(ConstraintKind::FlowBalance), 2 * n * t);
        assert_eq!(audit.count(ConstraintKind::LineLimit), 2 * l * t);
        assert_eq!(audit.count(ConstraintKind::RefBus), t);
        assert_eq!(audit.count(ConstraintKind::NonGenZero), (n - g) * t);
        assert_eq!(audit.count(ConstraintKind::GenBound), 2 * g * t);
        assert_eq!(audit.count(ConstraintKind::Ramp), 2 * g * (t - 1));
        assert_eq!(audit.count(ConstraintKind::CostCut), g * t * 10);
    }

    #[test]
    fn single_period_has_no_ramp_rows() {
        let mut case = parse_case(&fixture_path("case6.json")).unwrap();
        case.horizon = 1;
        case.loads = case.loads.iter().map(|row| vec![row[0]]).collect();
        let mut pb = conic::ConicProgram::new();
        let vars = ScheduleVars::create(&mut pb, &case);
        let audit = add_schedule_constraints(&mut pb, &case, 3, &vars).unwrap();
        assert_eq!(audit.count(ConstraintKind::Ramp), 0);
    }

    #[test]
    fn initial_output_adds_first_period_ramps() {
        let mut case = parse_case(&fixture_path("case6.json")).unwrap();
        for g in &mut case.generators {
            g.p_initial = Some(g.p_min);
        }
        let mut pb = conic::ConicProgram::new();
        let vars = ScheduleVars::create(&mut pb, &case);
        let audit = add_schedule_constraints(&mut pb, &case, 3, &vars).unwrap();
        assert_eq!(audit.count(ConstraintKind::Ramp), 2 * 3 * 4);
    }

    #[test]
    fn profit_arithmetic() {
        // P = 0 -> profit = -1'z.
        assert_abs_diff_eq!(
            evaluate_profit(&[0.0, 0.0], &[3.0, 4.0], &[9.0, 9.0]).unwrap(),
            -7.0
        );
        // single unit, single period.
        assert_abs_diff_eq!(evaluate_profit(&[100.0], &[250.0], &[3.0]).unwrap(), 50.0);
        assert!(evaluate_profit(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }
}
