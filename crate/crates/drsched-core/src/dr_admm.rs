//! Region-partition approximation solved by consensus ADMM.
//!
//! Buses are split into regions; each region carries its own ambiguity set
//! built from its units' price slice, its own robust CVaR block, and the
//! physical constraints touching only its variables. Tie-line rows are
//! replicated into both adjacent regions over local angle copies; boundary
//! and ghost angles are driven to agreement by scaled consensus ADMM.
//! Regions exchange nothing but boundary-angle values and duals (plus the
//! scalar objective used for the trace).

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use conic::{
    ConicProgram, LinExpr, PreparedSolver, Sense, SocId, SolveStatus, SolverOptions, VarId,
    WarmStart,
};

use crate::dr_exact::{add_dr_cvar_block, DrBlockIndex};
use crate::pricing::{AmbiguityParams, MomentEstimate, ScenarioSet, SupportBox};
use crate::system_model::{
    add_schedule_constraints, admittance_matrix, cost_cuts, evaluate_profit, NetworkCase,
    ScheduleDecision, ScheduleVars,
};
use crate::{AdmmError, ModelError, PricingError};

// --- partitioning -------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RegionInfo {
    pub buses: Vec<usize>,
    /// Indices into `case.generators`, in global order.
    pub gens: Vec<usize>,
    pub internal_lines: Vec<usize>,
    pub tie_lines: Vec<usize>,
    /// Region-owned endpoints of tie lines.
    pub boundary_buses: Vec<usize>,
    /// Other-region endpoints of tie lines this region touches.
    pub ghost_buses: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RegionPartition {
    pub n_regions: usize,
    pub region_of_bus: Vec<usize>,
    pub regions: Vec<RegionInfo>,
    /// All tie lines (indices into `case.lines`).
    pub tie_lines: Vec<usize>,
}

/// Builds the partition bookkeeping from a bus-to-region table.
pub fn partition_case(case: &NetworkCase, assignment: &[usize]) -> Result<RegionPartition, AdmmError> {
    if assignment.len() != case.n_buses {
        return Err(AdmmError::Partition(format!(
            "assignment covers {} buses, case has {}",
            assignment.len(),
            case.n_buses
        )));
    }
    let n_regions = assignment.iter().copied().max().map_or(0, |m| m + 1);
    if n_regions == 0 {
        return Err(AdmmError::Partition("no regions".into()));
    }
    let mut regions: Vec<RegionInfo> = (0..n_regions)
        .map(|_| RegionInfo {
            buses: Vec::new(),
            gens: Vec::new(),
            internal_lines: Vec::new(),
            tie_lines: Vec::new(),
            boundary_buses: Vec::new(),
            ghost_buses: Vec::new(),
        })
        .collect();
    for (bus, &r) in assignment.iter().enumerate() {
        if r >= n_regions {
            return Err(AdmmError::Partition(format!("bus {bus} has invalid region {r}")));
        }
        regions[r].buses.push(bus);
    }
    if let Some(empty) = regions.iter().position(|r| r.buses.is_empty()) {
        return Err(AdmmError::Partition(format!("region {empty} has no buses")));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        regions[assignment[gen.bus]].gens.push(g);
    }
    let mut ties = Vec::new();
    for (k, line) in case.lines.iter().enumerate() {
        let (ra, rb) = (assignment[line.from], assignment[line.to]);
        if ra == rb {
            regions[ra].internal_lines.push(k);
        } else {
            ties.push(k);
            for &(r, own, ghost) in
                &[(ra, line.from, line.to), (rb, line.to, line.from)]
            {
                regions[r].tie_lines.push(k);
                if !regions[r].boundary_buses.contains(&own) {
                    regions[r].boundary_buses.push(own);
                }
                if !regions[r].ghost_buses.contains(&ghost) {
                    regions[r].ghost_buses.push(ghost);
                }
            }
        }
    }
    for r in &mut regions {
        r.boundary_buses.sort_unstable();
        r.ghost_buses.sort_unstable();
    }
    Ok(RegionPartition {
        n_regions,
        region_of_bus: assignment.to_vec(),
        regions,
        tie_lines: ties,
    })
}

/// Reads a `bus_id,region_id` table (1-based bus ids; region labels are
/// compacted to `0..P-1` in sorted label order). A `bus_id,region_id`
/// header row is allowed.
pub fn parse_partition(path: &Path, n_buses: usize) -> Result<Vec<usize>, AdmmError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| AdmmError::Io(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (ln == 0 && line.starts_with("bus_id")) {
            continue;
        }
        let mut it = line.split(',');
        let bus: usize = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| AdmmError::Partition(format!("line {}: bad bus id", ln + 1)))?;
        let region: usize = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| AdmmError::Partition(format!("line {}: bad region id", ln + 1)))?;
        if bus == 0 || bus > n_buses {
            return Err(AdmmError::Partition(format!("line {}: bus {bus} out of range", ln + 1)));
        }
        pairs.push((bus - 1, region));
    }
    let mut labels: Vec<usize> = pairs.iter().map(|&(_, r)| r).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut assignment = vec![usize::MAX; n_buses];
    for (bus, region) in pairs {
        assignment[bus] = labels.binary_search(&region).expect("label present");
    }
    if let Some(missing) = assignment.iter().position(|&r| r == usize::MAX) {
        return Err(AdmmError::Partition(format!("bus {} not assigned", missing + 1)));
    }
    Ok(assignment)
}

// --- per-region pricing ----------------------------------------------------------

/// Ambiguity inputs of one region (None when the region has no units).
#[derive(Debug, Clone)]
pub struct RegionData {
    pub moments: MomentEstimate,
    pub support: SupportBox,
    pub params: AmbiguityParams,
}

/// Slices the sample matrix per region and builds each region's moments,
/// support and ambiguity parameters independently.
///
/// `effective_m`: when true, parameters use the documented effective sample
/// size whenever the actual count is below the confidence threshold.
pub fn region_pricing(
    set: &ScenarioSet,
    case: &NetworkCase,
    partition: &RegionPartition,
    delta: f64,
    effective_m: bool,
) -> Result<Vec<Option<RegionData>>, PricingError> {
    let horizon = case.horizon;
    let mut out = Vec::with_capacity(partition.n_regions);
    for region in &partition.regions {
        if region.gens.is_empty() {
            out.push(None);
            continue;
        }
        let coords: Vec<usize> = region
            .gens
            .iter()
            .flat_map(|&g| (0..horizon).map(move |t| g * horizon + t))
            .collect();
        let slice = set.slice(&coords);
        let moments = crate::pricing::estimate_moments(&slice, None)?;
        let support = crate::pricing::support_box(&slice)?;
        let m_used = if effective_m {
            crate::pricing::effective_sample_size(&moments, &support, delta, slice.n_samples())
        } else {
            slice.n_samples()
        };
        let params = crate::pricing::ambiguity_params(&moments, &support, delta, m_used)?;
        out.push(Some(RegionData { moments, support, params }));
    }
    Ok(out)
}

// --- region programs ---------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ADMMConfig {
    /// Base penalty weight; the effective weight is `rho` times the mean
    /// line susceptance magnitude.
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    /// Tolerances for the inner conic solves.
    pub inner_feas: f64,
    pub inner_gap: f64,
    pub inner_max_iter: usize,
}

impl Default for ADMMConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_primal: 1e-4,
            eps_dual: 1e-4,
            max_iter: 500,
            inner_feas: 1e-7,
            inner_gap: 1e-7,
            inner_max_iter: 60_000,
        }
    }
}

/// One region's assembled program and bookkeeping.
struct RegionProgram {
    program: ConicProgram,
    /// Local copies under consensus, as (global bus, period) in fixed order.
    copies: Vec<(usize, usize)>,
    /// Variable of each copy (same order).
    copy_vars: Vec<VarId>,
    /// Penalty SOC block (None when the region has no copies).
    penalty_soc: Option<SocId>,
    /// theta variables per local (region + ghost) bus.
    theta: BTreeMap<usize, Vec<VarId>>,
    /// P variable per region bus.
    p: BTreeMap<usize, Vec<VarId>>,
    /// z variables per region generator (global gen index order).
    z: Vec<Vec<VarId>>,
    dr: Option<DrBlockIndex>,
    prepared: PreparedSolver,
    warm: Option<WarmStart>,
}

fn build_region_program(
    case: &NetworkCase,
    partition: &RegionPartition,
    region_idx: usize,
    data: &Option<RegionData>,
    segments: usize,
    beta: f64,
    rho_eff: f64,
) -> Result<RegionProgram, ModelError> {
    let region = &partition.regions[region_idx];
    let horizon = case.horizon;
    let bmat = admittance_matrix(case)?;
    let mut pb = ConicProgram::new();

    let mut theta: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    for &b in region.buses.iter().chain(&region.ghost_buses) {
        theta.insert(b, pb.add_vars(horizon));
    }
    let mut p: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    for &b in &region.buses {
        p.insert(b, pb.add_vars(horizon));
    }
    let z: Vec<Vec<VarId>> = region.gens.iter().map(|_| pb.add_vars(horizon)).collect();

    let in_region = |b: usize| partition.region_of_bus[b] == region_idx;

    // Balance rows for every region bus; neighbors outside the region are
    // the ghost copies created above.
    for t in 0..horizon {
        for &i in &region.buses {
            let mut expr = LinExpr::var(p[&i][t]);
            for j in 0..case.n_buses {
                let bij = bmat[(i, j)];
                if bij != 0.0 {
                    let tv = theta.get(&j).ok_or_else(|| {
                        ModelError::Internal(format!("bus {j} not local to region {region_idx}"))
                    })?;
                    expr.add_term(tv[t], -bij);
                }
            }
            pb.add_row(expr.clone(), Sense::Ge, 0.0);
            pb.add_row(expr, Sense::Le, case.loads[i][t]);
        }
        for &k in region.internal_lines.iter().chain(&region.tie_lines) {
            let line = &case.lines[k];
            if let Some(fmax) = line.fmax {
                let flow = LinExpr::new()
                    .plus(theta[&line.from][t], 1.0 / line.x)
                    .plus(theta[&line.to][t], -1.0 / line.x);
                pb.add_row(flow.clone(), Sense::Le, fmax);
                pb.add_row(flow, Sense::Ge, -fmax);
            }
        }
        if in_region(case.ref_bus) {
            pb.add_row(LinExpr::var(theta[&case.ref_bus][t]), Sense::Eq, 0.0);
        }
        for &i in &region.buses {
            let has_gen = case.generators.iter().any(|g| g.bus == i);
            if !has_gen {
                pb.add_row(LinExpr::var(p[&i][t]), Sense::Eq, 0.0);
            }
        }
        for &g in &region.gens {
            let gen = &case.generators[g];
            pb.add_row(LinExpr::var(p[&gen.bus][t]), Sense::Ge, gen.p_min);
            pb.add_row(LinExpr::var(p[&gen.bus][t]), Sense::Le, gen.p_max);
        }
    }
    for (local, &g) in region.gens.iter().enumerate() {
        let gen = &case.generators[g];
        if let Some(p0) = gen.p_initial {
            pb.add_row(LinExpr::var(p[&gen.bus][0]), Sense::Le, p0 + gen.ramp_up);
            pb.add_row(LinExpr::var(p[&gen.bus][0]), Sense::Ge, p0 - gen.ramp_down);
        }
        for t in 1..horizon {
            let diff =
                LinExpr::new().plus(p[&gen.bus][t], 1.0).plus(p[&gen.bus][t - 1], -1.0);
            pb.add_row(diff.clone(), Sense::Le, gen.ramp_up);
            pb.add_row(diff, Sense::Ge, -gen.ramp_down);
        }
        let cuts = cost_cuts(gen, segments)?;
        for t in 0..horizon {
            for &(slope, intercept) in &cuts {
                pb.add_row(
                    LinExpr::new().plus(z[local][t], 1.0).plus(p[&gen.bus][t], -slope),
                    Sense::Ge,
                    intercept,
                );
            }
        }
    }

    // Robust CVaR block over the region's own price slice.
    let mut obj = LinExpr::new();
    let dr = if let Some(rd) = data {
        let p_gen: Vec<VarId> = region
            .gens
            .iter()
            .flat_map(|&g| p[&case.generators[g].bus].iter().copied())
            .collect();
        let z_flat: Vec<VarId> = z.iter().flatten().copied().collect();
        let blk =
            add_dr_cvar_block(&mut pb, &p_gen, &z_flat, &rd.moments, &rd.support, &rd.params, beta);
        obj.add_term(blk.r, 1.0);
        obj.add_term(blk.t, 1.0);
        Some(blk)
    } else {
        None
    };

    // Consensus copies: own boundary buses plus ghosts, all periods.
    let mut copies = Vec::new();
    let mut copy_vars = Vec::new();
    for &b in region.boundary_buses.iter().chain(&region.ghost_buses) {
        for t in 0..horizon {
            copies.push((b, t));
            copy_vars.push(theta[&b][t]);
        }
    }
    let penalty_soc = if copies.is_empty() {
        None
    } else {
        // s >= || theta_c - target ||^2 via the rotated-cone identity
        // ||(w, (1-s)/2)|| <= (1+s)/2; objective gains (rho/2) s.
        let s = pb.add_var();
        let mut vector: Vec<LinExpr> =
            copy_vars.iter().map(|&v| LinExpr::var(v)).collect();
        vector.push(LinExpr::term(s, -0.5).plus_const(0.5));
        let scalar = LinExpr::term(s, 0.5).plus_const(0.5);
        let id = pb.add_soc(vector, scalar);
        obj.add_term(s, 0.5 * rho_eff);
        Some(id)
    };
    pb.set_objective(obj);

    let prepared = PreparedSolver::new(&pb).map_err(ModelError::Conic)?;
    Ok(RegionProgram {
        program: pb,
        copies,
        copy_vars,
        penalty_soc,
        theta,
        p,
        z,
        dr,
        prepared,
        warm: None,
    })
}

impl RegionProgram {
    fn set_targets(&mut self, targets: &[f64]) {
        if let Some(soc) = self.penalty_soc {
            let block = &mut self.program.socs[soc.0];
            for (c, &target) in targets.iter().enumerate() {
                block.vector[c].constant = -target;
            }
        }
    }

    fn solve_once(
        &mut self,
        opts: &SolverOptions,
    ) -> Result<(Vec<f64>, f64, conic::ConicSolution), ModelError> {
        let mut o = opts.clone();
        o.warm_start = self.warm.clone();
        let sol = self.prepared.resolve(&self.program, &o).map_err(ModelError::Conic)?;
        if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::NumericalLimit {
            return Err(crate::dr_exact::solve_failed(sol.status, &sol.residuals));
        }
        let copy_values: Vec<f64> =
            self.copy_vars.iter().map(|v| sol.x[v.idx()]).collect();
        let objective = self
            .dr
            .as_ref()
            .map(|d| sol.x[d.r.idx()] + sol.x[d.t.idx()])
            .unwrap_or(0.0);
        self.warm = Some(sol.warm_start());
        Ok((copy_values, objective, sol))
    }
}

// --- message log (privacy audit surface) --------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTarget {
    pub bus: usize,
    pub t: usize,
    pub global: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryValue {
    pub bus: usize,
    pub t: usize,
    pub angle: f64,
}

/// Everything the coordinator and the regions exchange.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdmmMessage {
    Broadcast { iter: usize, region: usize, targets: Vec<BoundaryTarget> },
    RegionReturn { iter: usize, region: usize, copies: Vec<BoundaryValue>, objective: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub sum_objective: f64,
}

#[derive(Debug)]
pub struct AdmmOutcome {
    pub decision: ScheduleDecision,
    pub region_objectives: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub iterations: usize,
    pub message_log: Vec<AdmmMessage>,
    pub primal_res: f64,
    pub dual_res: f64,
}

pub fn write_admm_trace(path: &Path, trace: &[TraceRow]) -> Result<(), AdmmError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AdmmError::Io(e.to_string()))?;
    w.write_record(["iter", "primal_res", "dual_res", "sum_objective"])
        .map_err(|e| AdmmError::Io(e.to_string()))?;
    for row in trace {
        w.write_record([
            row.iter.to_string(),
            format!("{:.9e}", row.primal_res),
            format!("{:.9e}", row.dual_res),
            format!("{:.9e}", row.sum_objective),
        ])
        .map_err(|e| AdmmError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| AdmmError::Io(e.to_string()))?;
    Ok(())
}

// --- the consensus loop ------------------------------------------------------------

/// Solves the region-partition model by scaled consensus ADMM over the
/// boundary-bus angles.
///
/// Region subproblems within an iteration are independent and solved in
/// parallel; the coordinator then averages copies, updates duals, and
/// broadcasts new targets. `mu_global` is only used to price the stitched
/// schedule for reporting.
pub fn admm_solve(
    case: &NetworkCase,
    partition: &RegionPartition,
    region_data: &[Option<RegionData>],
    segments: usize,
    beta: f64,
    cfg: &ADMMConfig,
    mu_global: &[f64],
) -> Result<AdmmOutcome, AdmmError> {
    if region_data.len() != partition.n_regions {
        return Err(AdmmError::Partition("region data length mismatch".into()));
    }
    let rho_eff = cfg.rho * mean_susceptance(case);
    let mut workers: Vec<RegionProgram> = (0..partition.n_regions)
        .map(|r| build_region_program(case, partition, r, &region_data[r], segments, beta, rho_eff))
        .collect::<Result<_, ModelError>>()?;

    // Shared coordinate table and which regions hold a copy of each.
    let mut shared: Vec<(usize, usize)> = Vec::new();
    for w in &workers {
        shared.extend(w.copies.iter().copied());
    }
    shared.sort_unstable();
    shared.dedup();
    let coord_of: BTreeMap<(usize, usize), usize> =
        shared.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let holders: Vec<usize> = {
        let mut h = vec![0usize; shared.len()];
        for w in &workers {
            for cp in &w.copies {
                h[coord_of[cp]] += 1;
            }
        }
        h
    };
    let n_copies_total: usize = workers.iter().map(|w| w.copies.len()).sum();
    let scale = (n_copies_total.max(1) as f64).sqrt();

    let mut global = vec![0.0f64; shared.len()];
    let mut duals: Vec<Vec<f64>> = workers.iter().map(|w| vec![0.0; w.copies.len()]).collect();
    let mut trace = Vec::new();
    let mut log = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_solutions: Vec<Option<conic::ConicSolution>> = vec![None; workers.len()];
    let mut region_objectives = vec![0.0f64; workers.len()];
    let (mut primal_res, mut dual_res) = (0.0f64, 0.0f64);

    let inner = SolverOptions {
        tol: conic::Tolerances::new(cfg.inner_feas, cfg.inner_gap),
        max_iter: cfg.inner_max_iter,
        ..SolverOptions::default()
    };

    for iter in 0..cfg.max_iter.max(1) {
        iterations = iter + 1;
        // Broadcast targets.
        let mut all_targets: Vec<Vec<f64>> = Vec::with_capacity(workers.len());
        for (d, w) in workers.iter().enumerate() {
            let targets: Vec<f64> = w
                .copies
                .iter()
                .enumerate()
                .map(|(c, cp)| global[coord_of[cp]] - duals[d][c])
                .collect();
            log.push(AdmmMessage::Broadcast {
                iter: iterations,
                region: d,
                targets: w
                    .copies
                    .iter()
                    .zip(&targets)
                    .zip(&duals[d])
                    .map(|(((bus, t), &g), &u)| BoundaryTarget { bus: *bus, t: *t, global: g, dual: u })
                    .collect(),
            });
            all_targets.push(targets);
        }

        // Parallel region solves.
        let results: Vec<Result<(Vec<f64>, f64, conic::ConicSolution), ModelError>> = workers
            .par_iter_mut()
            .zip(all_targets.par_iter())
            .map(|(w, targets)| {
                w.set_targets(targets);
                w.solve_once(&inner)
            })
            .collect();
        let mut copy_values: Vec<Vec<f64>> = Vec::with_capacity(workers.len());
        for (d, res) in results.into_iter().enumerate() {
            let (vals, obj, sol) = res.map_err(AdmmError::Model)?;
            log.push(AdmmMessage::RegionReturn {
                iter: iterations,
                region: d,
                copies: workers[d]
                    .copies
                    .iter()
                    .zip(&vals)
                    .map(|(&(bus, t), &angle)| BoundaryValue { bus, t, angle })
                    .collect(),
                objective: obj,
            });
            region_objectives[d] = obj;
            last_solutions[d] = Some(sol);
            copy_values.push(vals);
        }

        // Global average (of value + dual) and dual update.
        let mut new_global = vec![0.0f64; shared.len()];
        for (d, w) in workers.iter().enumerate() {
            for (c, cp) in w.copies.iter().enumerate() {
                new_global[coord_of[cp]] += copy_values[d][c] + duals[d][c];
            }
        }
        for (k, g) in new_global.iter_mut().enumerate() {
            *g /= holders[k].max(1) as f64;
        }
        let mut pr2 = 0.0f64;
        for (d, w) in workers.iter().enumerate() {
            for (c, cp) in w.copies.iter().enumerate() {
                let diff = copy_values[d][c] - new_global[coord_of[cp]];
                pr2 += diff * diff;
                duals[d][c] += diff;
            }
        }
        primal_res = pr2.sqrt();
        let mut dr2 = 0.0f64;
        for k in 0..shared.len() {
            let diff = new_global[k] - global[k];
            dr2 += holders[k] as f64 * diff * diff;
        }
        dual_res = rho_eff * dr2.sqrt();
        global = new_global;

        let sum_objective: f64 = region_objectives.iter().sum();
        trace.push(TraceRow { iter: iterations, primal_res, dual_res, sum_objective });

        if primal_res <= cfg.eps_primal * scale && dual_res <= cfg.eps_dual * scale {
            converged = true;
            break;
        }
    }

    // Stitch the schedule: internal angles from the owner region, shared
    // angles from the consensus value.
    let horizon = case.horizon;
    let mut theta = vec![vec![0.0f64; horizon]; case.n_buses];
    let mut p = vec![vec![0.0f64; horizon]; case.n_gens()];
    let mut z = vec![vec![0.0f64; horizon]; case.n_gens()];
    let mut alpha_sum = 0.0;
    for (d, w) in workers.iter().enumerate() {
        let sol = last_solutions[d]
            .as_ref()
            .ok_or_else(|| AdmmError::Model(ModelError::Internal("region never solved".into())))?;
        for &b in &partition.regions[d].buses {
            for t in 0..horizon {
                theta[b][t] = sol.x[w.theta[&b][t].idx()];
            }
        }
        for (local, &g) in partition.regions[d].gens.iter().enumerate() {
            let bus = case.generators[g].bus;
            for t in 0..horizon {
                p[g][t] = sol.x[w.p[&bus][t].idx()];
                z[g][t] = sol.x[w.z[local][t].idx()];
            }
        }
        if let Some(dr) = &w.dr {
            alpha_sum += sol.x[dr.alpha.idx()];
        }
    }
    for (k, &(b, t)) in shared.iter().enumerate() {
        theta[b][t] = global[k];
    }
    let p_flat: Vec<f64> = p.iter().flatten().copied().collect();
    let z_flat: Vec<f64> = z.iter().flatten().copied().collect();
    let profit = evaluate_profit(&p_flat, &z_flat, mu_global)
        .map_err(|e| AdmmError::Model(ModelError::Case(e)))?;
    let objective: f64 = region_objectives.iter().sum();
    let decision = ScheduleDecision { p, theta, z, alpha: alpha_sum, objective, profit };

    Ok(AdmmOutcome {
        decision,
        region_objectives,
        trace,
        converged,
        iterations,
        message_log: log,
        primal_res,
        dual_res,
    })
}

fn mean_susceptance(case: &NetworkCase) -> f64 {
    if case.lines.is_empty() {
        return 1.0;
    }
    case.lines.iter().map(|l| 1.0 / l.x).sum::<f64>() / case.lines.len() as f64
}

// --- monolithic reference ------------------------------------------------------------

/// Index tables of the monolithic (single-program) region-partition model.
pub struct JointModelHandle {
    pub program: ConicProgram,
    pub p_gen: Vec<VarId>,
    pub z: Vec<VarId>,
    pub theta: Vec<Vec<VarId>>,
    pub blocks: Vec<Option<DrBlockIndex>>,
    pub n_gens: usize,
    pub horizon: usize,
}

/// Builds the region-partition objective over one shared variable space
/// (no copies, no penalty): the physical set appears once, and each region
/// contributes its own robust block over its slice of `P` and `z`.
pub fn build_joint_region_program(
    case: &NetworkCase,
    partition: &RegionPartition,
    region_data: &[Option<RegionData>],
    segments: usize,
    beta: f64,
) -> Result<JointModelHandle, ModelError> {
    let mut pb = ConicProgram::new();
    let vars = ScheduleVars::create(&mut pb, case);
    add_schedule_constraints(&mut pb, case, segments, &vars)?;
    let horizon = case.horizon;
    let mut obj = LinExpr::new();
    let mut blocks = Vec::with_capacity(partition.n_regions);
    for (r, data) in region_data.iter().enumerate() {
        match data {
            None => blocks.push(None),
            Some(rd) => {
                let region = &partition.regions[r];
                let p_gen: Vec<VarId> = region
                    .gens
                    .iter()
                    .flat_map(|&g| vars.p[case.generators[g].bus].iter().copied())
                    .collect();
                let z: Vec<VarId> = region
                    .gens
                    .iter()
                    .flat_map(|&g| vars.z[g].iter().copied())
                    .collect();
                let blk = add_dr_cvar_block(
                    &mut pb,
                    &p_gen,
                    &z,
                    &rd.moments,
                    &rd.support,
                    &rd.params,
                    beta,
                );
                obj.add_term(blk.r, 1.0);
                obj.add_term(blk.t, 1.0);
                blocks.push(Some(blk));
            }
        }
    }
    pb.set_objective(obj);
    Ok(JointModelHandle {
        program: pb,
        p_gen: vars.p_gen_flat(case),
        z: vars.z_flat(),
        theta: vars.theta.clone(),
        blocks,
        n_gens: case.n_gens(),
        horizon,
    })
}
