//! Vector-splitting upper approximation: whiten the price vector with the
//! covariance eigendecomposition, split the whitened coordinates into
//! contiguous blocks, drop cross-block second moments, and solve the
//! resulting program whose matrix inequalities have block size instead of
//! full size.

use nalgebra::{DMatrix, DVector};

use conic::{
    min_eigenvalue, ConicProgram, ConicSolution, LinExpr, PsdBlock, PsdId, Sense, SolveStatus,
    VarId,
};

use crate::dr_exact::{
    eval_psd_block, h_value, solve_failed, ExtractDiagnostics, ExtractOptions, QmatIndex,
};
use crate::pricing::{AmbiguityParams, MomentEstimate, SupportBox};
use crate::system_model::{
    add_schedule_constraints, evaluate_profit, schedule_residuals, ConstraintAudit, NetworkCase,
    ScheduleDecision, ScheduleVars,
};
use crate::ModelError;

/// Eigendecomposition-based whitening `lambda_c = Lam^{-1/2} U' (lambda - mu)`.
#[derive(Debug, Clone)]
pub struct WhiteningTransform {
    /// Orthogonal eigenvector matrix, columns ordered by descending eigenvalue.
    pub u: DMatrix<f64>,
    /// Eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    pub mu: DVector<f64>,
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `V = U Lam^{1/2}`, the inverse map matrix.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut v = self.u.clone();
        for k in 0..d {
            let s = self.eigenvalues[k].sqrt();
            for i in 0..d {
                v[(i, k)] *= s;
            }
        }
        v
    }

    pub fn forward(&self, lambda: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let diff = DVector::from_column_slice(lambda) - &self.mu;
        let proj = self.u.transpose() * diff;
        (0..d).map(|k| proj[k] / self.eigenvalues[k].sqrt()).collect()
    }

    pub fn inverse(&self, lambda_c: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut scaled = DVector::from_column_slice(lambda_c);
        for k in 0..d {
            scaled[k] *= self.eigenvalues[k].sqrt();
        }
        let out = &self.u * scaled + &self.mu;
        (0..d).map(|k| out[k]).collect()
    }

    /// Reconstruction `U Lam U'`, for validation against the covariance.
    pub fn reconstruct_sigma(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut ul = self.u.clone();
        for k in 0..d {
            for i in 0..d {
                ul[(i, k)] *= self.eigenvalues[k];
            }
        }
        ul * self.u.transpose()
    }
}

/// Whitens from the (regularized) covariance. Errors when the covariance is
/// not positive definite; the pricing layer must regularize first.
pub fn eigen_whiten(m: &MomentEstimate) -> Result<WhiteningTransform, ModelError> {
    let d = m.mu.len();
    let e = conic::sym_eigen(&m.sigma);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| e.values[b].partial_cmp(&e.values[a]).expect("finite eigenvalues"));
    let min = e.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(ModelError::Parameter(format!(
            "covariance not positive definite (min eigenvalue {min:.3e}); regularize first"
        )));
    }
    let mut u = DMatrix::zeros(d, d);
    let mut vals = DVector::zeros(d);
    for (new, &old) in order.iter().enumerate() {
        vals[new] = e.values[old];
        for i in 0..d {
            u[(i, new)] = e.vectors[(i, old)];
        }
    }
    Ok(WhiteningTransform { u, eigenvalues: vals, mu: m.mu.clone() })
}

/// Contiguous split of the whitened coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub sizes: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl SplitPlan {
    pub fn pieces(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }
}

/// Blocks of size ceil(gt/P) or floor(gt/P) over the descending-eigenvalue
/// ordering, larger blocks first.
pub fn make_split_plan(gt: usize, pieces: usize) -> Result<SplitPlan, ModelError> {
    if pieces == 0 || pieces > gt {
        return Err(ModelError::Parameter(format!(
            "piece count must satisfy 1 <= P <= {gt}, got {pieces}"
        )));
    }
    let small = gt / pieces;
    let n_big = gt % pieces;
    let mut sizes = Vec::with_capacity(pieces);
    for i in 0..pieces {
        sizes.push(if i < n_big { small + 1 } else { small });
    }
    let mut offsets = Vec::with_capacity(pieces);
    let mut off = 0;
    for &s in &sizes {
        offsets.push(off);
        off += s;
    }
    Ok(SplitPlan { sizes, offsets })
}

#[derive(Debug, Clone)]
pub struct SplitVarIndex {
    pub p_gen: Vec<VarId>,
    pub theta: Vec<Vec<VarId>>,
    pub z: Vec<VarId>,
    pub alpha: VarId,
    /// Whitened-coordinate linear dual (length gt).
    pub q: Vec<VarId>,
    pub r: VarId,
    pub t: VarId,
    pub tau1: Vec<VarId>,
    pub tau2: Vec<VarId>,
    pub q_blocks: Vec<QmatIndex>,
    pub z1: Vec<VarId>,
    pub z2: Vec<VarId>,
}

pub struct SplitModelHandle {
    pub program: ConicProgram,
    pub idx: SplitVarIndex,
    pub lmi1_ids: Vec<PsdId>,
    pub lmi2_ids: Vec<PsdId>,
    pub q_psd_ids: Vec<PsdId>,
    pub audit: ConstraintAudit,
    pub plan: SplitPlan,
    pub whitening: WhiteningTransform,
    pub gt: usize,
    pub beta: f64,
    pub n_gens: usize,
    pub horizon: usize,
}

/// Assembles the split program: per-block matrix inequalities tied together
/// by two scalar equality rows and a trace-based moment row.
pub fn build_split_sdp(
    case: &NetworkCase,
    segments: usize,
    moments: &MomentEstimate,
    support: &SupportBox,
    params: &AmbiguityParams,
    beta: f64,
    plan: &SplitPlan,
) -> Result<SplitModelHandle, ModelError> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ModelError::Parameter(format!("beta must be in (0,1), got {beta}")));
    }
    let gt = case.price_dim();
    if plan.total() != gt {
        return Err(ModelError::Parameter(format!(
            "split plan covers {} coordinates, case has {gt}",
            plan.total()
        )));
    }
    if support.dim() != gt || moments.mu.len() != gt {
        return Err(ModelError::Parameter("dimension mismatch".into()));
    }
    let whitening = eigen_whiten(moments)?;
    let v = whitening.v_matrix();
    let mu = &moments.mu;
    let pieces = plan.pieces();
    let inv1b = 1.0 / (1.0 - beta);

    let mut pb = ConicProgram::new();
    let vars = ScheduleVars::create(&mut pb, case);
    let audit = add_schedule_constraints(&mut pb, case, segments, &vars)?;
    let p_gen = vars.p_gen_flat(case);
    let z = vars.z_flat();

    let alpha = pb.add_var();
    let r = pb.add_var();
    let t = pb.add_var();
    let q = pb.add_vars(gt);
    let tau1 = pb.add_vars(2 * gt);
    let tau2 = pb.add_vars(2 * gt);
    for &tv in tau1.iter().chain(&tau2) {
        pb.set_lower(tv, 0.0);
    }
    let z1 = pb.add_vars(pieces);
    let z2 = pb.add_vars(pieces);
    let q_blocks: Vec<QmatIndex> =
        plan.sizes.iter().map(|&m| QmatIndex::create(&mut pb, m)).collect();

    // tau' A mu and -tau' B pieces shared by both scalar rows.
    let add_tau_a_mu = |expr: &mut LinExpr, tau: &[VarId]| {
        for l in 0..gt {
            expr.add_term(tau[l], mu[l]);
            expr.add_term(tau[gt + l], -mu[l]);
        }
    };
    let add_neg_tau_b = |expr: &mut LinExpr, tau: &[VarId]| {
        for l in 0..gt {
            expr.add_term(tau[l], -support.lambda_plus[l]);
            expr.add_term(tau[gt + l], support.lambda_minus[l]);
        }
    };

    // Scalar row tying the first branch: r - alpha - tau1'B + tau1'A mu + sum z1 = 0.
    let mut row1 = LinExpr::new().plus(r, 1.0).plus(alpha, -1.0);
    add_neg_tau_b(&mut row1, &tau1);
    add_tau_a_mu(&mut row1, &tau1);
    for &zv in &z1 {
        row1.add_term(zv, 1.0);
    }
    pb.add_row(row1, Sense::Eq, 0.0);

    // Scalar row for the loss branch:
    // r - tau2'B + tau2'A mu + beta alpha/(1-beta) - 1'z/(1-beta)
    //   + P'mu/(1-beta) + sum z2 = 0.
    let mut row2 = LinExpr::new().plus(r, 1.0).plus(alpha, beta * inv1b);
    add_neg_tau_b(&mut row2, &tau2);
    add_tau_a_mu(&mut row2, &tau2);
    for &zv in &z {
        row2.add_term(zv, -inv1b);
    }
    for (k, &pv) in p_gen.iter().enumerate() {
        row2.add_term(pv, mu[k] * inv1b);
    }
    for &zv in &z2 {
        row2.add_term(zv, 1.0);
    }
    pb.add_row(row2, Sense::Eq, 0.0);

    // Per-block matrix inequalities. The edge vector of block i couples the
    // block's q entries with tau through the inverse-map columns V_i, and
    // for the loss branch additionally with P through V_i/(1-beta).
    let mut lmi1_ids = Vec::with_capacity(pieces);
    let mut lmi2_ids = Vec::with_capacity(pieces);
    let mut q_psd_ids = Vec::with_capacity(pieces);
    for i in 0..pieces {
        let m_i = plan.sizes[i];
        let range = plan.range(i);

        let omega = |tau: &[VarId], with_p: bool| -> Vec<LinExpr> {
            range
                .clone()
                .map(|col| {
                    let mut e = LinExpr::var(q[col]);
                    for l in 0..gt {
                        let vcol = v[(l, col)];
                        if vcol != 0.0 {
                            e.add_term(tau[l], vcol);
                            e.add_term(tau[gt + l], -vcol);
                            if with_p {
                                e.add_term(p_gen[l], vcol * inv1b);
                            }
                        }
                    }
                    e
                })
                .collect()
        };

        let mut blk1 = PsdBlock::zeroed(m_i + 1);
        let mut blk2 = PsdBlock::zeroed(m_i + 1);
        let mut qblk = PsdBlock::zeroed(m_i);
        for bj in 0..m_i {
            for bi in 0..=bj {
                *blk1.entry_mut(bi, bj) = LinExpr::var(q_blocks[i].var(bi, bj));
                *blk2.entry_mut(bi, bj) = LinExpr::var(q_blocks[i].var(bi, bj));
                *qblk.entry_mut(bi, bj) = LinExpr::var(q_blocks[i].var(bi, bj));
            }
        }
        let om1 = omega(&tau1, false);
        let om2 = omega(&tau2, true);
        for bj in 0..m_i {
            *blk1.entry_mut(bj, m_i) = om1[bj].scaled(0.5);
            *blk2.entry_mut(bj, m_i) = om2[bj].scaled(0.5);
        }
        *blk1.entry_mut(m_i, m_i) = LinExpr::term(z1[i], -1.0);
        *blk2.entry_mut(m_i, m_i) = LinExpr::term(z2[i], -1.0);
        lmi1_ids.push(pb.add_psd(blk1));
        lmi2_ids.push(pb.add_psd(blk2));
        q_psd_ids.push(pb.add_psd(qblk));
    }

    // Moment row: t >= gamma2 sum_i tr(Q_i) + sqrt(gamma1) ||q||.
    let mut scalar = LinExpr::var(t);
    for (i, qb) in q_blocks.iter().enumerate() {
        for k in 0..plan.sizes[i] {
            scalar.add_term(qb.var(k, k), -params.gamma2);
        }
    }
    if params.gamma1 > 0.0 {
        let sg = params.gamma1.sqrt();
        let vector: Vec<LinExpr> = q.iter().map(|&qv| LinExpr::term(qv, sg)).collect();
        pb.add_soc(vector, scalar);
    } else {
        pb.add_row(scalar, Sense::Ge, 0.0);
    }

    let mut obj = LinExpr::new();
    obj.add_term(r, 1.0);
    obj.add_term(t, 1.0);
    pb.set_objective(obj);

    Ok(SplitModelHandle {
        program: pb,
        idx: SplitVarIndex {
            p_gen,
            theta: vars.theta.clone(),
            z,
            alpha,
            q,
            r,
            t,
            tau1,
            tau2,
            q_blocks,
            z1,
            z2,
        },
        lmi1_ids,
        lmi2_ids,
        q_psd_ids,
        audit,
        plan: plan.clone(),
        whitening,
        gt,
        beta,
        n_gens: case.n_gens(),
        horizon: case.horizon,
    })
}

fn gather(x: &[f64], vars: &[VarId]) -> Vec<f64> {
    vars.iter().map(|v| x[v.idx()]).collect()
}

/// Recovers the schedule from an optimal split solve (profit at the mean).
pub fn extract_split_solution(
    handle: &SplitModelHandle,
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
    let theta: Vec<Vec<f64>> = handle.idx.theta.iter().map(|row| gather(x, row)).collect();
    let alpha = x[handle.idx.alpha.idx()];
    let objective = x[handle.idx.r.idx()] + x[handle.idx.t.idx()];
    let mu: Vec<f64> = moments.mu.iter().copied().collect();
    let profit = evaluate_profit(&p_flat, &z_flat, &mu)?;

    let mut q_min_eig = f64::INFINITY;
    for qb in &handle.idx.q_blocks {
        if qb.dim > 0 {
            q_min_eig = q_min_eig.min(min_eigenvalue(&qb.value(x)).map_err(ModelError::Conic)?);
        }
    }
    if q_min_eig == f64::INFINITY {
        q_min_eig = 0.0;
    }
    let mut lmi_min_eigs = Vec::new();
    for id in handle.lmi1_ids.iter().chain(&handle.lmi2_ids) {
        lmi_min_eigs
            .push(min_eigenvalue(&eval_psd_block(&handle.program, *id, x)).map_err(ModelError::Conic)?);
    }

    let decision = ScheduleDecision {
        p: (0..handle.n_gens)
            .map(|g| p_flat[g * handle.horizon..(g + 1) * handle.horizon].to_vec())
            .collect(),
        theta,
        z: (0..handle.n_gens)
            .map(|g| z_flat[g * handle.horizon..(g + 1) * handle.horizon].to_vec())
            .collect(),
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
            "a Q block has eigenvalue {q_min_eig:.3e} below -{:.1e}",
            opts.psd_tol
        )));
    }
    if res.max() > opts.schedule_tol {
        return Err(ModelError::Rejected(format!(
            "schedule violates the feasible set by {:.3e}",
            res.max()
        )));
    }
    Ok((decision, diagnostics))
}

/// Margin of the whitened robust constraint at a whitened point:
/// `r + sum_i lc_i' Q_i lc_i + q'lc - h(y, alpha, V lc + mu)`.
pub fn whitened_margin(
    handle: &SplitModelHandle,
    sol: &ConicSolution,
    lambda_c: &[f64],
) -> Result<f64, ModelError> {
    let x = &sol.x;
    let p_flat = gather(x, &handle.idx.p_gen);
    let z_flat = gather(x, &handle.idx.z);
    let alpha = x[handle.idx.alpha.idx()];
    let r = x[handle.idx.r.idx()];
    let mut quad = 0.0;
    for (i, qb) in handle.idx.q_blocks.iter().enumerate() {
        let range = handle.plan.range(i);
        let sub = &lambda_c[range];
        let qv = qb.value(x);
        for a in 0..sub.len() {
            for b in 0..sub.len() {
                quad += sub[a] * qv[(a, b)] * sub[b];
            }
        }
    }
    let qvec = gather(x, &handle.idx.q);
    let lin: f64 = qvec.iter().zip(lambda_c).map(|(a, b)| a * b).sum();
    let lambda = handle.whitening.inverse(lambda_c);
    let h = h_value(&p_flat, &z_flat, alpha, &lambda, handle.beta)?;
    Ok(r + quad + lin - h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::MomentEstimate;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn moments_from(sigma: DMatrix<f64>, mu: Vec<f64>) -> MomentEstimate {
        MomentEstimate {
            mu: DVector::from_column_slice(&mu),
            sigma,
            regularization_added: 0.0,
        }
    }

    #[test]
    fn whiten_identity_covariance() {
        let m = moments_from(DMatrix::identity(3, 3), vec![1.0, 2.0, 3.0]);
        let w = eigen_whiten(&m).unwrap();
        let recon = w.reconstruct_sigma();
        assert!((recon - DMatrix::identity(3, 3)).amax() < 1e-12);
        let x = [4.0, 5.0, 6.0];
        let back = w.inverse(&w.forward(&x));
        for (a, b) in back.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn whiten_diagonal_eigenvalues_descending() {
        let m = moments_from(DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0])), vec![0.0, 0.0]);
        let w = eigen_whiten(&m).unwrap();
        assert_abs_diff_eq!(w.eigenvalues[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.eigenvalues[1], 1.0, epsilon = 1e-12);
        // Lambda^{1/2} = diag(2, 1) in the sorted basis.
        assert_abs_diff_eq!(w.eigenvalues[0].sqrt(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.eigenvalues[1].sqrt(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn whiten_rejects_singular() {
        let mut sig = DMatrix::identity(2, 2);
        sig[(1, 1)] = 0.0;
        let m = moments_from(sig, vec![0.0, 0.0]);
        assert!(eigen_whiten(&m).is_err());
    }

    fn random_spd(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.1
    }

    #[test]
    fn whiten_random_spd_reconstruction_and_covariance() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let d = 8;
        let sigma = random_spd(d, &mut rng);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = moments_from(sigma.clone(), mu);
        let w = eigen_whiten(&m).unwrap();
        let rel = (w.reconstruct_sigma() - &sigma).amax() / sigma.amax();
        assert!(rel < 1e-8, "reconstruction error {rel}");

        // Whitened sample cloud has near-identity covariance: draw samples
        // with covariance Sigma via its square root.
        let root = crate::pricing::sym_matrix_power(&sigma, 0.5, 0.0);
        let n = 20_000;
        let mut cov = DMatrix::<f64>::zeros(d, d);
        let normal = rand_distr::Normal::new(0.0f64, 1.0).unwrap();
        for _ in 0..n {
            let zs: Vec<f64> = (0..d).map(|_| rand_distr::Distribution::sample(&normal, &mut rng)).collect();
            let x = &root * DVector::from_column_slice(&zs) + &m.mu;
            let xv: Vec<f64> = (0..d).map(|k| x[k]).collect();
            let wv = w.forward(&xv);
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += wv[i] * wv[j];
                }
            }
        }
        cov /= n as f64;
        let err = (&cov - DMatrix::identity(d, d)).amax();
        assert!(err < 0.1, "whitened covariance deviates by {err}");
    }

    #[test]
    fn split_plan_examples() {
        assert_eq!(make_split_plan(12, 1).unwrap().sizes, vec![12]);
        assert_eq!(make_split_plan(12, 4).unwrap().sizes, vec![3, 3, 3, 3]);
        assert_eq!(make_split_plan(5, 2).unwrap().sizes, vec![3, 2]);
        assert!(make_split_plan(5, 6).is_err());
        assert!(make_split_plan(5, 0).is_err());
        let plan = make_split_plan(7, 3).unwrap();
        assert_eq!(plan.sizes, vec![3, 2, 2]);
        assert_eq!(plan.offsets, vec![0, 3, 5]);
    }

    #[test]
    fn block_decomposition_identity() {
        // sum_i V_i lambda_{c_i} reproduces V lambda_c exactly.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(37);
        let d = 9;
        let sigma = random_spd(d, &mut rng);
        let m = moments_from(sigma, vec![0.0; d]);
        let w = eigen_whiten(&m).unwrap();
        let v = w.v_matrix();
        for pieces in [1usize, 2, 3, 4] {
            let plan = make_split_plan(d, pieces).unwrap();
            let lc: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let full = &v * DVector::from_column_slice(&lc);
            let mut sum = DVector::<f64>::zeros(d);
            for i in 0..plan.pieces() {
                for col in plan.range(i) {
                    for row in 0..d {
                        sum[row] += v[(row, col)] * lc[col];
                    }
                }
            }
            assert!((sum - full).amax() < 1e-10);
        }
    }
}
