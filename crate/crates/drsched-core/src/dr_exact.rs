//! The exact moment-robust CVaR model, plus the scalar CVaR machinery used
//! to validate it.
//!
//! The robust counterpart minimizes `r + t` subject to two matrix
//! inequalities (the duals of the two semi-infinite branches of the
//! piecewise-linear risk function over the box support), one moment row
//! bounding `t`, the PSD requirement on the second-order dual block `Q`,
//! and the physical feasible set.

use nalgebra::{DMatrix, DVector};

use conic::{
    min_eigenvalue, ConicProgram, ConicSolution, LinExpr, PsdBlock, PsdId, ResidualReport, Sense,
    SolveStatus, VarId,
};

use crate::pricing::{AmbiguityParams, MomentEstimate, SupportBox};
use crate::system_model::{
    add_schedule_constraints, evaluate_profit, schedule_residuals, ConstraintAudit, NetworkCase,
    ScheduleDecision, ScheduleVars,
};
use crate::ModelError;

// --- CVaR oracle machinery ---------------------------------------------------

/// The piecewise-linear robust risk integrand:
/// `h = max(alpha, L/(1-beta) - beta*alpha/(1-beta))` with loss
/// `L = 1'z - P'lambda`.
pub fn h_value(
    p: &[f64],
    z: &[f64],
    alpha: f64,
    lambda: &[f64],
    beta: f64,
) -> Result<f64, ModelError> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ModelError::Parameter(format!("beta must be in (0,1), got {beta}")));
    }
    if p.len() != lambda.len() || z.len() != p.len() {
        return Err(ModelError::Parameter("h_value: shape mismatch".into()));
    }
    let loss: f64 = z.iter().sum::<f64>() - p.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>();
    Ok(h_of_loss(loss, alpha, beta))
}

pub fn h_of_loss(loss: f64, alpha: f64, beta: f64) -> f64 {
    alpha.max(loss / (1.0 - beta) - beta * alpha / (1.0 - beta))
}

/// Value-at-risk / conditional value-at-risk of a discrete loss
/// distribution, computed two independent ways.
#[derive(Debug, Clone, Copy)]
pub struct CvarReport {
    pub var_beta: f64,
    pub cvar_beta: f64,
    pub beta: f64,
}

/// Computes VaR/CVaR by (a) sorting and averaging the beta-tail and (b)
/// minimizing `alpha + E[L - alpha]^+ / (1-beta)` over the loss atoms, and
/// requires the two routes to agree to 1e-9.
pub fn empirical_cvar(losses: &[f64], probs: &[f64], beta: f64) -> Result<CvarReport, ModelError> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ModelError::Parameter(format!("beta must be in (0,1), got {beta}")));
    }
    if losses.is_empty() || losses.len() != probs.len() {
        return Err(ModelError::Parameter("empirical_cvar: shape mismatch".into()));
    }
    if probs.iter().any(|&p| p < -1e-15) {
        return Err(ModelError::Parameter("negative probability".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ModelError::Parameter(format!("probabilities sum to {total}")));
    }

    // Route (a): sort ascending, find the beta-quantile atom, average the tail.
    let mut atoms: Vec<(f64, f64)> = losses.iter().copied().zip(probs.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("losses must be orderable"));
    let mut cum = 0.0;
    let mut var = atoms[atoms.len() - 1].0;
    let mut tail_start = atoms.len();
    for (k, &(l, p)) in atoms.iter().enumerate() {
        cum += p;
        if cum >= beta - 1e-15 {
            var = l;
            tail_start = k;
            break;
        }
    }
    let f_at_var = {
        let mut f = 0.0;
        for &(l, p) in &atoms {
            if l <= var {
                f += p;
            }
        }
        f
    };
    let mut tail_mass_value = 0.0;
    for &(l, p) in &atoms[tail_start..] {
        if l > var {
            tail_mass_value += p * l;
        }
    }
    let cvar_sort = (tail_mass_value + (f_at_var - beta) * var) / (1.0 - beta);

    // Route (b): scan the Rockafellar-Uryasev objective over the atoms.
    let mut best = f64::INFINITY;
    let mut var_scan = var;
    for &(a, _) in &atoms {
        let mut expect = 0.0;
        for &(l, p) in &atoms {
            if l > a {
                expect += p * (l - a);
            }
        }
        let g = a + expect / (1.0 - beta);
        if g < best - 1e-15 {
            best = g;
            var_scan = a;
        }
    }

    if (cvar_sort - best).abs() > 1e-9 {
        return Err(ModelError::Internal(format!(
            "CVaR routes disagree: sorting {cvar_sort} vs minimization {best}"
        )));
    }
    if (var_scan - var).abs() > 1e-9 {
        return Err(ModelError::Internal(format!(
            "VaR routes disagree: sorting {var} vs minimization {var_scan}"
        )));
    }
    if cvar_sort < var - 1e-9 * (1.0 + var.abs()) {
        return Err(ModelError::Internal(format!("CVaR {cvar_sort} below VaR {var}")));
    }
    // The tail average can undershoot the threshold by accumulated rounding
    // (amplified by 1/(1-beta)); the exact theory gives CVaR >= VaR.
    Ok(CvarReport { var_beta: var, cvar_beta: cvar_sort.max(var), beta })
}

// --- SDP assembly --------------------------------------------------------------

/// Index of a symmetric matrix variable stored as its packed upper triangle
/// (column-major), matching [`PsdBlock`] entry order.
#[derive(Debug, Clone)]
pub struct QmatIndex {
    pub dim: usize,
    pub vars: Vec<VarId>,
}

impl QmatIndex {
    pub fn create(pb: &mut ConicProgram, dim: usize) -> Self {
        Self { dim, vars: pb.add_vars(dim * (dim + 1) / 2) }
    }

    pub fn var(&self, i: usize, j: usize) -> VarId {
        self.vars[PsdBlock::tri_index(i, j)]
    }

    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            for i in 0..=j {
                let v = x[self.var(i, j).idx()];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct ExactVarIndex {
    /// Generator outputs, unit-major (`g*T + t`).
    pub p_gen: Vec<VarId>,
    pub theta: Vec<Vec<VarId>>,
    /// Cost epigraph, unit-major.
    pub z: Vec<VarId>,
    pub alpha: VarId,
    pub q: Vec<VarId>,
    pub r: VarId,
    pub t: VarId,
    pub tau1: Vec<VarId>,
    pub tau2: Vec<VarId>,
    pub qmat: QmatIndex,
}

/// The assembled exact model with the index tables needed to read the
/// solution back.
pub struct ExactModelHandle {
    pub program: ConicProgram,
    pub idx: ExactVarIndex,
    pub lmi1: PsdId,
    pub lmi2: PsdId,
    pub q_psd: PsdId,
    pub audit: ConstraintAudit,
    pub gt: usize,
    pub beta: f64,
    pub n_gens: usize,
    pub horizon: usize,
}

fn check_inputs(
    case: &NetworkCase,
    moments: &MomentEstimate,
    support: &SupportBox,
    params: &AmbiguityParams,
    beta: f64,
) -> Result<usize, ModelError> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ModelError::Parameter(format!("beta must be in (0,1), got {beta}")));
    }
    let gt = case.price_dim();
    if moments.mu.len() != gt || moments.sigma.nrows() != gt {
        return Err(ModelError::Parameter(format!(
            "moment dimension {} does not match case dimension {gt}",
            moments.mu.len()
        )));
    }
    if support.dim() != gt {
        return Err(ModelError::Parameter("support box dimension mismatch".into()));
    }
    if !(params.gamma1 >= 0.0 && params.gamma2 >= 0.0)
        || !params.gamma1.is_finite()
        || !params.gamma2.is_finite()
    {
        return Err(ModelError::Parameter(format!(
            "invalid ambiguity parameters: gamma1 = {}, gamma2 = {}",
            params.gamma1, params.gamma2
        )));
    }
    Ok(gt)
}

/// Adds the robust corner scalar `- tau' B` terms (`B = [plus; -minus]`).
fn add_neg_tau_b(expr: &mut LinExpr, tau: &[VarId], support: &SupportBox) {
    let gt = support.dim();
    for k in 0..gt {
        expr.add_term(tau[k], -support.lambda_plus[k]);
        expr.add_term(tau[gt + k], support.lambda_minus[k]);
    }
}

/// Variables and block ids of one robust CVaR block over a price vector.
#[derive(Debug, Clone)]
pub struct DrBlockIndex {
    pub alpha: VarId,
    pub r: VarId,
    pub t: VarId,
    pub q: Vec<VarId>,
    pub tau1: Vec<VarId>,
    pub tau2: Vec<VarId>,
    pub qmat: QmatIndex,
    pub lmi1: PsdId,
    pub lmi2: PsdId,
    pub q_psd: PsdId,
}

/// Emits the robust CVaR machinery for the loss `1'z - P'lambda` over the
/// given support box and moment pair: two matrix inequalities, the PSD
/// requirement on `Q`, and the moment bound on `t`. The objective
/// contribution `r + t` is added by the caller.
pub(crate) fn add_dr_cvar_block(
    pb: &mut ConicProgram,
    p_gen: &[VarId],
    z: &[VarId],
    moments: &MomentEstimate,
    support: &SupportBox,
    params: &AmbiguityParams,
    beta: f64,
) -> DrBlockIndex {
    let gt = p_gen.len();
    debug_assert_eq!(moments.mu.len(), gt);
    debug_assert_eq!(support.dim(), gt);
    let alpha = pb.add_var();
    let r = pb.add_var();
    let t = pb.add_var();
    let q = pb.add_vars(gt);
    let tau1 = pb.add_vars(2 * gt);
    let tau2 = pb.add_vars(2 * gt);
    for &v in tau1.iter().chain(&tau2) {
        pb.set_lower(v, 0.0);
    }
    let qmat = QmatIndex::create(pb, gt);
    let inv1b = 1.0 / (1.0 - beta);

    // First matrix inequality: edge 0.5(q + A' tau1), corner r - alpha - tau1'B.
    let mut lmi1 = PsdBlock::zeroed(gt + 1);
    for j in 0..gt {
        for i in 0..=j {
            *lmi1.entry_mut(i, j) = LinExpr::var(qmat.var(i, j));
        }
        *lmi1.entry_mut(j, gt) = LinExpr::new()
            .plus(q[j], 0.5)
            .plus(tau1[j], 0.5)
            .plus(tau1[gt + j], -0.5);
    }
    {
        let corner = lmi1.entry_mut(gt, gt);
        corner.add_term(r, 1.0);
        corner.add_term(alpha, -1.0);
        add_neg_tau_b(corner, &tau1, support);
    }
    let lmi1 = pb.add_psd(lmi1);

    // Second matrix inequality: the loss branch. Edge gains P/(1-beta); the
    // corner is r + beta*alpha/(1-beta) - 1'z/(1-beta) - tau2'B.
    let mut lmi2 = PsdBlock::zeroed(gt + 1);
    for j in 0..gt {
        for i in 0..=j {
            *lmi2.entry_mut(i, j) = LinExpr::var(qmat.var(i, j));
        }
        *lmi2.entry_mut(j, gt) = LinExpr::new()
            .plus(q[j], 0.5)
            .plus(p_gen[j], 0.5 * inv1b)
            .plus(tau2[j], 0.5)
            .plus(tau2[gt + j], -0.5);
    }
    {
        let corner = lmi2.entry_mut(gt, gt);
        corner.add_term(r, 1.0);
        corner.add_term(alpha, beta * inv1b);
        for &zv in z {
            corner.add_term(zv, -inv1b);
        }
        add_neg_tau_b(corner, &tau2, support);
    }
    let lmi2 = pb.add_psd(lmi2);

    // Q itself is PSD.
    let mut qblk = PsdBlock::zeroed(gt);
    for j in 0..gt {
        for i in 0..=j {
            *qblk.entry_mut(i, j) = LinExpr::var(qmat.var(i, j));
        }
    }
    let q_psd = pb.add_psd(qblk);

    // Moment row: t >= (gamma2 Sigma + mu mu') o Q + mu'q
    //                + sqrt(gamma1) || Sigma^{1/2} (q + 2 Q mu) ||.
    let mu = &moments.mu;
    let weight = {
        let mut w = moments.sigma.clone() * params.gamma2;
        for i in 0..gt {
            for j in 0..gt {
                w[(i, j)] += mu[i] * mu[j];
            }
        }
        w
    };
    let mut scalar = LinExpr::var(t);
    for j in 0..gt {
        for i in 0..=j {
            let coeff = if i == j { weight[(i, i)] } else { 2.0 * weight[(i, j)] };
            scalar.add_term(qmat.var(i, j), -coeff);
        }
        scalar.add_term(q[j], -mu[j]);
    }
    if params.gamma1 > 0.0 {
        let sg = params.gamma1.sqrt();
        let sigma_half = crate::pricing::sym_matrix_power(&moments.sigma, 0.5, 0.0);
        // Auxiliary vector w = Sigma^{1/2} (q + 2 Q mu), defined by equality
        // rows so the dense coefficients live in individually-scalable
        // rows; the cone block itself stays diagonal.
        let wvars = pb.add_vars(gt);
        for k in 0..gt {
            let mut row = LinExpr::term(wvars[k], -1.0);
            for l in 0..gt {
                let skl = sigma_half[(k, l)];
                if skl != 0.0 {
                    row.add_term(q[l], skl);
                }
            }
            // 2 sum_l S_kl (Q mu)_l, expanded over the packed triangle.
            for a in 0..gt {
                for b in a..gt {
                    let coeff = if a == b {
                        2.0 * sigma_half[(k, a)] * mu[a]
                    } else {
                        2.0 * (sigma_half[(k, a)] * mu[b] + sigma_half[(k, b)] * mu[a])
                    };
                    if coeff != 0.0 {
                        row.add_term(qmat.var(a, b), coeff);
                    }
                }
            }
            pb.add_row(row, Sense::Eq, 0.0);
        }
        let vector = wvars.iter().map(|&w| LinExpr::term(w, sg)).collect();
        pb.add_soc(vector, scalar);
    } else {
        pb.add_row(scalar, Sense::Ge, 0.0);
    }

    DrBlockIndex { alpha, r, t, q, tau1, tau2, qmat, lmi1, lmi2, q_psd }
}

/// Assembles the exact robust CVaR program.
pub fn build_exact_sdp(
    case: &NetworkCase,
    segments: usize,
    moments: &MomentEstimate,
    support: &SupportBox,
    params: &AmbiguityParams,
    beta: f64,
) -> Result<ExactModelHandle, ModelError> {
    let gt = check_inputs(case, moments, support, params, beta)?;
    let mut pb = ConicProgram::new();
    let vars = ScheduleVars::create(&mut pb, case);
    let audit = add_schedule_constraints(&mut pb, case, segments, &vars)?;
    let p_gen = vars.p_gen_flat(case);
    let z = vars.z_flat();

    let blk = add_dr_cvar_block(&mut pb, &p_gen, &z, moments, support, params, beta);

    let mut obj = LinExpr::new();
    obj.add_term(blk.r, 1.0);
    obj.add_term(blk.t, 1.0);
    pb.set_objective(obj);

    Ok(ExactModelHandle {
        program: pb,
        idx: ExactVarIndex {
            p_gen,
            theta: vars.theta.clone(),
            z,
            alpha: blk.alpha,
            q: blk.q,
            r: blk.r,
            t: blk.t,
            tau1: blk.tau1,
            tau2: blk.tau2,
            qmat: blk.qmat,
        },
        lmi1: blk.lmi1,
        lmi2: blk.lmi2,
        q_psd: blk.q_psd,
        audit,
        gt,
        beta,
        n_gens: case.n_gens(),
        horizon: case.horizon,
    })
}

// --- extraction -----------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    /// Max allowed violation of the physical constraint set (MW/rad).
    pub schedule_tol: f64,
    /// Most negative admissible eigenvalue of the PSD blocks.
    pub psd_tol: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { schedule_tol: 1e-6, psd_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExtractDiagnostics {
    pub q_min_eig: f64,
    pub lmi_min_eigs: Vec<f64>,
    pub schedule_residual: f64,
    pub solver_primal: f64,
    pub solver_dual: f64,
    pub solver_gap: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

/// Evaluates a PSD block of a program at a solution vector (symbolic
/// entries, no svec scaling).
pub fn eval_psd_block(program: &ConicProgram, id: PsdId, x: &[f64]) -> DMatrix<f64> {
    let blk = &program.psds[id.0];
    let mut m = DMatrix::zeros(blk.dim, blk.dim);
    for j in 0..blk.dim {
        for i in 0..=j {
            let v = blk.entry(i, j).eval(x);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn gather(x: &[f64], vars: &[VarId]) -> Vec<f64> {
    vars.iter().map(|v| x[v.idx()]).collect()
}

fn to_matrix(flat: &[f64], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|g| flat[g * cols..(g + 1) * cols].to_vec()).collect()
}

/// Recovers the schedule from an optimal solve of the exact model, verifying
/// PSD feasibility of `Q` and membership of the physical schedule before
/// returning. Profit is reported at the estimated mean price.
pub fn extract_solution(
    handle: &ExactModelHandle,
    sol: &ConicSolution,
    moments: &MomentEstimate,
    case: &NetworkCase,
    segments: usize,
    opts: &ExtractOptions,
) -> Result<(ScheduleDecision, ExtractDiagnostics), ModelError> {
    if sol.status != SolveStatus::Optimal {
        return Err(solve_failed(sol.status, &sol.residuals));
    }
    let x = &sol.x;
    let p_flat = gather(x, &handle.idx.p_gen);
    let z_flat = gather(x, &handle.idx.z);
    let theta: Vec<Vec<f64>> =
        handle.idx.theta.iter().map(|row| gather(x, row)).collect();
    let alpha = x[handle.idx.alpha.idx()];
    let objective = x[handle.idx.r.idx()] + x[handle.idx.t.idx()];
    let mu: Vec<f64> = moments.mu.iter().copied().collect();
    let profit = evaluate_profit(&p_flat, &z_flat, &mu)?;

    let qv = handle.idx.qmat.value(x);
    let q_min_eig = min_eigenvalue(&qv).map_err(ModelError::Conic)?;
    let lmi_min_eigs = vec![
        min_eigenvalue(&eval_psd_block(&handle.program, handle.lmi1, x)).map_err(ModelError::Conic)?,
        min_eigenvalue(&eval_psd_block(&handle.program, handle.lmi2, x)).map_err(ModelError::Conic)?,
    ];

    let decision = ScheduleDecision {
        p: to_matrix(&p_flat, handle.n_gens, handle.horizon),
        theta,
        z: to_matrix(&z_flat, handle.n_gens, handle.horizon),
        alpha,
        objective,
        profit,
    };
    let res = schedule_residuals(case, segments, &decision)?;
    let diagnostics = ExtractDiagnostics {
        q_min_eig,
        lmi_min_eigs,
        schedule_residual: res.max(),
        solver_primal: sol.residuals.primal,
        solver_dual: sol.residuals.dual,
        solver_gap: sol.residuals.gap,
        iterations: sol.iterations,
        wall_seconds: sol.wall_time.as_secs_f64(),
    };
    if q_min_eig < -opts.psd_tol {
        return Err(ModelError::Rejected(format!(
            "Q has eigenvalue {q_min_eig:.3e} below -{:.1e}",
            opts.psd_tol
        )));
    }
    if res.max() > opts.schedule_tol {
        return Err(ModelError::Rejected(format!(
            "schedule violates the feasible set by {:.3e} (tolerance {:.1e})",
            res.max(),
            opts.schedule_tol
        )));
    }
    Ok((decision, diagnostics))
}

pub fn solve_failed(status: SolveStatus, residuals: &ResidualReport) -> ModelError {
    ModelError::SolveFailed {
        status: status.as_str(),
        primal: residuals.primal,
        dual: residuals.dual,
        gap: residuals.gap,
    }
}

/// Margin of the first semi-infinite branch at a price point:
/// `r + lambda'Q lambda + lambda'q - h(y, alpha, lambda)`; feasibility of
/// the robust constraint means this is nonnegative over the support.
pub fn semi_infinite_margin(
    handle: &ExactModelHandle,
    sol: &ConicSolution,
    lambda: &[f64],
) -> Result<f64, ModelError> {
    let x = &sol.x;
    let p_flat = gather(x, &handle.idx.p_gen);
    let z_flat = gather(x, &handle.idx.z);
    let alpha = x[handle.idx.alpha.idx()];
    let r = x[handle.idx.r.idx()];
    let qv = handle.idx.qmat.value(x);
    let qvec = gather(x, &handle.idx.q);
    let lam = DVector::from_column_slice(lambda);
    let quad = (lam.transpose() * &qv * &lam)[(0, 0)];
    let lin: f64 = qvec.iter().zip(lambda).map(|(a, b)| a * b).sum();
    let h = h_value(&p_flat, &z_flat, alpha, lambda, handle.beta)?;
    Ok(r + quad + lin - h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn h_value_kink_point() {
        // When the loss equals alpha, both branches coincide.
        let p = [10.0];
        let z = [30.0];
        let lambda = [1.0];
        let alpha = 20.0; // loss = 30 - 10 = 20 = alpha
        for beta in [0.5, 0.9, 0.99] {
            let h = h_value(&p, &z, alpha, &lambda, beta).unwrap();
            assert_abs_diff_eq!(h, alpha, epsilon = 1e-12);
        }
    }

    #[test]
    fn h_value_loss_branch() {
        // alpha = 0, beta = 0.9, loss = 1 -> h = 10.
        let h = h_value(&[0.0], &[1.0], 0.0, &[5.0], 0.9).unwrap();
        assert_abs_diff_eq!(h, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn h_minus_alpha_is_positive_part_identity() {
        // h - alpha = [loss - alpha]^+ / (1 - beta) for random triples.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for _ in 0..20 {
            let loss: f64 = rng.random_range(-50.0..50.0);
            let alpha: f64 = rng.random_range(-50.0..50.0);
            let beta: f64 = rng.random_range(0.05..0.95);
            let h = h_of_loss(loss, alpha, beta);
            let identity = alpha + (loss - alpha).max(0.0) / (1.0 - beta);
            assert_abs_diff_eq!(h, identity, epsilon = 1e-10);
        }
    }

    #[test]
    fn h_value_rejects_bad_beta() {
        assert!(h_value(&[1.0], &[1.0], 0.0, &[1.0], 1.0).is_err());
        assert!(h_value(&[1.0], &[1.0], 0.0, &[1.0], 0.0).is_err());
    }

    #[test]
    fn cvar_four_equal_atoms() {
        let r = empirical_cvar(&[1.0, 2.0, 3.0, 4.0], &[0.25; 4], 0.5).unwrap();
        assert_abs_diff_eq!(r.var_beta, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.cvar_beta, 3.5, epsilon = 1e-12);
    }

    #[test]
    fn cvar_constant_loss() {
        for beta in [0.1, 0.5, 0.9, 0.99] {
            let r = empirical_cvar(&[7.5; 6], &[1.0 / 6.0; 6], beta).unwrap();
            assert_abs_diff_eq!(r.var_beta, 7.5, epsilon = 1e-12);
            assert_abs_diff_eq!(r.cvar_beta, 7.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn cvar_tail_split_atom() {
        // losses {0, 10}, probs {0.95, 0.05}, beta 0.9: the worst 10% of
        // mass is half at 10 and half at 0 -> CVaR = 5.
        let r = empirical_cvar(&[0.0, 10.0], &[0.95, 0.05], 0.9).unwrap();
        assert_abs_diff_eq!(r.var_beta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.cvar_beta, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn cvar_rejects_bad_probabilities() {
        assert!(empirical_cvar(&[1.0, 2.0], &[0.6, 0.6], 0.5).is_err());
        assert!(empirical_cvar(&[1.0, 2.0], &[1.2, -0.2], 0.5).is_err());
        assert!(empirical_cvar(&[], &[], 0.5).is_err());
    }

    #[test]
    fn cvar_agreement_on_random_distributions() {
        // Both computation routes agree (enforced inside empirical_cvar) and
        // VaR <= CVaR, across sizes and levels.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for trial in 0..200 {
            let size = rng.random_range(1..=100);
            let losses: Vec<f64> = (0..size).map(|_| rng.random_range(-10.0..10.0)).collect();
            let mut probs: Vec<f64> = (0..size).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            for beta in [0.5, 0.85, 0.9, 0.95, 0.99] {
                let r = empirical_cvar(&losses, &probs, beta)
                    .unwrap_or_else(|e| panic!("trial {trial} beta {beta}: {e}"));
                assert!(r.cvar_beta >= r.var_beta - 1e-12);
            }
        }
    }
}
