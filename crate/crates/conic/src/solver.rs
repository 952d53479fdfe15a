//! First-order conic solver: operator splitting on the homogeneous
//! self-dual embedding (SCS-style Douglas-Rachford iteration).
//!
//! Solves `min c'x  s.t.  b - Ax in K` together with its dual, returning
//! primal/dual solutions, or a certificate of infeasibility/unboundedness.
//! The embedding variable is `u = (x, y, tau)`, `v = (0, s, kappa)`; each
//! iteration solves one quasidefinite linear system (factorized once) and
//! projects onto the cone product.
//!
//! [`PreparedSolver`] keeps the canonicalization, equilibration and LDL
//! factorization alive between solves whose constraint matrix is unchanged
//! (only `b`/`c` differ), which is what an ADMM outer loop needs.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::canon::{canonicalize, Canonical};
use crate::cones::project_dual_cone;
use crate::equil::{equilibrate_a, Scaling};
use crate::ldl::LdlFactor;
use crate::program::ConicProgram;
use crate::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative feasibility tolerance on primal and dual residuals.
    pub feasibility: f64,
    /// Relative duality-gap tolerance.
    pub relative_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feasibility: 1e-7, relative_gap: 1e-7 }
    }
}

impl Tolerances {
    pub fn new(feasibility: f64, relative_gap: f64) -> Self {
        Self { feasibility, relative_gap }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: Tolerances,
    pub max_iter: usize,
    pub check_interval: usize,
    /// Over-relaxation parameter in (0, 2).
    pub over_relax: f64,
    /// Anderson acceleration memory (0 disables acceleration).
    pub accel_memory: usize,
    pub warm_start: Option<WarmStart>,
    /// Hard wall-clock limit; exceeding it yields `NumericalLimit`.
    /// Off by default so runs stay deterministic.
    pub time_limit: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_iter: 200_000,
            check_interval: 40,
            over_relax: 1.6,
            accel_memory: 15,
            warm_start: None,
            time_limit: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(feasibility: f64, relative_gap: f64) -> Self {
        Self { tol: Tolerances::new(feasibility, relative_gap), ..Self::default() }
    }
}

/// Primal/dual point used to warm-start the iteration (original units).
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalLimit => "numerical_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    /// max-norm of `Ax + s - b`, relative to `1 + ||b||_inf`.
    pub primal: f64,
    /// max-norm of `A'y + c`, relative to `1 + ||c||_inf`.
    pub dual: f64,
    /// `|c'x + b'y| / (1 + |c'x| + |b'y|)`.
    pub gap: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal values for every program variable.
    pub x: Vec<f64>,
    /// Dual value per source linear row (sign: objective sensitivity is
    /// `d(obj)/d(rhs) = -dual` for equality rows of a minimization).
    pub row_duals: Vec<f64>,
    /// Full canonical dual vector (diagnostics / warm starts).
    pub y: Vec<f64>,
    /// Canonical primal slack vector (cone-feasible by construction).
    pub s: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub residuals: ResidualReport,
}

impl ConicSolution {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart { x: self.x.clone(), y: self.y.clone(), s: self.s.clone() }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reusable solver state: canonical form, scaling and KKT factorization.
///
/// `resolve` accepts a program whose rows/blocks have the same coefficient
/// structure but possibly different constant terms and objective.
pub struct PreparedSolver {
    orig: Canonical,
    scaled_a: crate::sparse::Csr,
    scaling: Scaling,
    kkt: LdlFactor,
    obj_constant: f64,
    n_rows_src: usize,
}

impl PreparedSolver {
    pub fn new(p: &ConicProgram) -> Result<Self, ConicError> {
        p.validate()?;
        let orig = canonicalize(p);
        let mut scaled_a = orig.a.clone();
        let scaling = equilibrate_a(&mut scaled_a, &orig.layout);
        let kkt = LdlFactor::new(&scaled_a)?;
        Ok(Self {
            orig,
            scaled_a,
            scaling,
            kkt,
            obj_constant: p.objective.constant,
            n_rows_src: p.rows.len(),
        })
    }

    /// Solves with the prepared factorization, re-reading the constants of
    /// `p` (the constraint matrix must be structurally identical to the
    /// program this solver was prepared with).
    pub fn resolve(&mut self, p: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
        let fresh = canonicalize(p);
        if fresh.a.nnz() != self.orig.a.nnz() || fresh.a.m != self.orig.a.m {
            return Err(ConicError::BadProgram(
                "resolve: constraint structure differs from the prepared program".into(),
            ));
        }
        self.orig.b = fresh.b;
        self.orig.c = fresh.c;
        self.obj_constant = p.objective.constant;
        run(
            &self.orig,
            &self.scaled_a,
            &self.scaling,
            &mut self.kkt,
            self.obj_constant,
            self.n_rows_src,
            opts,
        )
    }
}

/// Solves a conic program. See module docs for the algorithm.
pub fn solve(p: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
    p.validate()?;
    let orig = canonicalize(p);
    let n = orig.a.n;
    if orig.a.m == 0 {
        let status = if orig.c.iter().all(|&v| v == 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::Unbounded
        };
        return Ok(ConicSolution {
            status,
            x: vec![0.0; n],
            row_duals: Vec::new(),
            y: Vec::new(),
            s: Vec::new(),
            objective: p.objective.constant,
            iterations: 0,
            wall_time: Duration::default(),
            residuals: ResidualReport::default(),
        });
    }
    let mut scaled_a = orig.a.clone();
    let scaling = equilibrate_a(&mut scaled_a, &orig.layout);
    let mut kkt = LdlFactor::new(&scaled_a)?;
    run(&orig, &scaled_a, &scaling, &mut kkt, p.objective.constant, p.rows.len(), opts)
}

#[allow(clippy::too_many_arguments)]
fn run(
    orig: &Canonical,
    scaled_a: &crate::sparse::Csr,
    scaling: &Scaling,
    kkt: &mut LdlFactor,
    obj_constant: f64,
    n_rows_src: usize,
    opts: &SolverOptions,
) -> Result<ConicSolution, ConicError> {
    let start = Instant::now();
    let n = orig.a.n;
    let m = orig.a.m;
    let total = n + m + 1;

    // Scaled constants:  b_hat = sigma * D b,  c_hat = rho * E c.
    let mut b_hat: Vec<f64> = orig.b.iter().zip(&scaling.d).map(|(b, d)| b * d).collect();
    let mut c_hat: Vec<f64> = orig.c.iter().zip(&scaling.e).map(|(c, e)| c * e).collect();
    let nb = b_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nc = c_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sigma = (1.0 / nb.max(1e-12)).clamp(1e-6, 1e6);
    let rho = (1.0 / nc.max(1e-12)).clamp(1e-6, 1e6);
    b_hat.iter_mut().for_each(|v| *v *= sigma);
    c_hat.iter_mut().for_each(|v| *v *= rho);

    // h = (c_hat, b_hat), g = M^{-1} h.
    let mut h = Vec::with_capacity(n + m);
    h.extend_from_slice(&c_hat);
    h.extend_from_slice(&b_hat);
    let mut g = h.clone();
    for v in g[n..].iter_mut() {
        *v = -*v;
    }
    kkt.solve_in_place(&mut g);
    let hg = dot(&h, &g);

    let mut u = vec![0.0f64; total];
    let mut v = vec![0.0f64; total];
    u[total - 1] = 1.0;
    v[total - 1] = 1.0;
    if let Some(ws) = &opts.warm_start {
        if ws.x.len() == n && ws.y.len() == m && ws.s.len() == m {
            let ok = ws.x.iter().chain(&ws.y).chain(&ws.s).all(|z| z.is_finite());
            if ok {
                for j in 0..n {
                    u[j] = ws.x[j] * sigma / scaling.e[j];
                }
                for i in 0..m {
                    u[n + i] = ws.y[i] * rho / scaling.d[i];
                    v[n + i] = ws.s[i] * sigma * scaling.d[i];
                }
                u[total - 1] = 1.0;
                v[total - 1] = 0.0;
            }
        }
    }

    let norm_b = inf_norm(&orig.b);
    let norm_c = inf_norm(&orig.c);
    let alpha = opts.over_relax;

    let mut w = vec![0.0f64; total];
    let mut ut = vec![0.0f64; total];
    let mut best_score = f64::INFINITY;
    let mut best: Option<(Vec<f64>, Vec<f64>, Vec<f64>, ResidualReport, f64)> = None;
    let mut iterations = 0usize;
    let mut status = SolveStatus::NumericalLimit;

    let unscale = |u: &[f64], v: &[f64], tau: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; m];
        let mut s = vec![0.0; m];
        for j in 0..n {
            x[j] = u[j] * scaling.e[j] / (sigma * tau);
        }
        for i in 0..m {
            y[i] = u[n + i] * scaling.d[i] / (rho * tau);
            s[i] = v[n + i] / (scaling.d[i] * sigma * tau);
        }
        (x, y, s)
    };

    // Anderson acceleration over the packed (u, v) fixed-point state, with
    // the retroactive safeguard described in `accel`.
    let mut aa = crate::accel::Anderson::new(opts.accel_memory, 2 * total);
    let mut gu = vec![0.0f64; total];
    let mut gv = vec![0.0f64; total];
    let mut packed_g = vec![0.0f64; 2 * total];
    let mut packed_f = vec![0.0f64; 2 * total];
    let mut f_guard = f64::INFINITY;
    let mut last_was_aa = false;
    let mut fallback: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        // Plain relaxed DR step from (u, v) into (gu, gv).
        for k in 0..total {
            w[k] = u[k] + v[k];
        }
        {
            let nm = n + m;
            let w_tau = w[nm];
            ut[..nm].copy_from_slice(&w[..nm]);
            for z in ut[n..nm].iter_mut() {
                *z = -*z;
            }
            kkt.solve_in_place(&mut ut[..nm]);
            let hp = dot(&h, &ut[..nm]);
            let tau = (w_tau + hp) / (1.0 + hg);
            for (o, gk) in ut[..nm].iter_mut().zip(&g) {
                *o -= tau * gk;
            }
            ut[nm] = tau;
        }
        for k in 0..total {
            ut[k] = alpha * ut[k] + (1.0 - alpha) * u[k];
        }
        for k in 0..total {
            gu[k] = ut[k] - v[k];
        }
        project_dual_cone(&orig.layout, &mut gu[n..n + m]);
        if gu[total - 1] < 0.0 {
            gu[total - 1] = 0.0;
        }
        for k in 0..total {
            gv[k] = v[k] - ut[k] + gu[k];
        }

        let mut f_norm2 = 0.0f64;
        for k in 0..total {
            let du = gu[k] - u[k];
            let dv = gv[k] - v[k];
            f_norm2 += du * du + dv * dv;
        }
        let f_norm = f_norm2.sqrt();
        if last_was_aa && f_norm > f_guard {
            // The accelerated step lost ground; resume from the plain
            // candidate it displaced.
            if let Some((fu, fv)) = fallback.take() {
                u = fu;
                v = fv;
            }
            aa.clear();
            last_was_aa = false;
            continue;
        }
        f_guard = f_norm;

        let advance =
            |u: &mut Vec<f64>, v: &mut Vec<f64>,
             gu: &[f64], gv: &[f64],
             packed_g: &mut [f64], packed_f: &mut [f64],
             aa: &mut crate::accel::Anderson,
             fallback: &mut Option<(Vec<f64>, Vec<f64>)>,
             last_was_aa: &mut bool| {
                for k in 0..total {
                    packed_g[k] = gu[k];
                    packed_g[total + k] = gv[k];
                    packed_f[k] = gu[k] - u[k];
                    packed_f[total + k] = gv[k] - v[k];
                }
                match aa.push_and_candidate(packed_g, packed_f) {
                    Some(cand) => {
                        *fallback = Some((gu.to_vec(), gv.to_vec()));
                        u.copy_from_slice(&cand[..total]);
                        v.copy_from_slice(&cand[total..]);
                        *last_was_aa = true;
                    }
                    None => {
                        u.copy_from_slice(gu);
                        v.copy_from_slice(gv);
                        *last_was_aa = false;
                    }
                }
            };

        if (iter + 1) % opts.check_interval != 0 {
            advance(
                &mut u, &mut v, &gu, &gv, &mut packed_g, &mut packed_f, &mut aa,
                &mut fallback, &mut last_was_aa,
            );
            continue;
        }

        // Termination checks read the plain (cone-clean) candidate; the
        // iterate itself still advances along the accelerated path below.
        // Joint rescale on blowup (the map is positively homogeneous).
        let big = inf_norm(&gu).max(inf_norm(&gv));
        if big > 1e9 {
            let s = 1.0 / big;
            gu.iter_mut().for_each(|z| *z *= s);
            gv.iter_mut().for_each(|z| *z *= s);
            u.copy_from_slice(&gu);
            v.copy_from_slice(&gv);
            aa.clear();
            last_was_aa = false;
            f_guard = f64::INFINITY;
            continue;
        }

        let tau = gu[total - 1];
        if tau > 1e-10 {
            let (x, y, s) = unscale(&gu, &gv, tau);
            let mut rp = s.clone();
            for i in 0..m {
                rp[i] -= orig.b[i];
            }
            orig.a.matvec_acc(&x, 1.0, &mut rp);
            let mut rd = orig.c.clone();
            orig.a.matvec_t_acc(&y, 1.0, &mut rd);
            let cx = dot(&orig.c, &x);
            let by = dot(&orig.b, &y);
            let rep = ResidualReport {
                primal: inf_norm(&rp) / (1.0 + norm_b),
                dual: inf_norm(&rd) / (1.0 + norm_c),
                gap: (cx + by).abs() / (1.0 + cx.abs() + by.abs()),
            };
            let score = rep.max();
            if score < best_score {
                best_score = score;
                best = Some((x.clone(), y.clone(), s.clone(), rep, cx));
            }
            if rep.primal <= opts.tol.feasibility
                && rep.dual <= opts.tol.feasibility
                && rep.gap <= opts.tol.relative_gap
            {
                status = SolveStatus::Optimal;
                best = Some((x, y, s, rep, cx));
                break;
            }
        }

        // Certificates (scaled back without tau normalization).
        let (xc, yc, sc) = unscale(&gu, &gv, 1.0);
        let by = dot(&orig.b, &yc);
        if by < -1e-12 {
            // Primal-infeasibility certificate: y in K*, A'y = 0, b'y = -1.
            let scale = -1.0 / by;
            let mut rd = vec![0.0; n];
            orig.a.matvec_t_acc(&yc, scale, &mut rd);
            if inf_norm(&rd) <= opts.tol.feasibility * (1.0 + norm_c) {
                let y: Vec<f64> = yc.iter().map(|z| z * scale).collect();
                let row_duals =
                    (0..n_rows_src).map(|k| y[orig.map.row_of[k]]).collect();
                return Ok(ConicSolution {
                    status: SolveStatus::Infeasible,
                    x: vec![f64::NAN; n],
                    row_duals,
                    y,
                    s: vec![0.0; m],
                    objective: f64::INFINITY,
                    iterations,
                    wall_time: start.elapsed(),
                    residuals: ResidualReport::default(),
                });
            }
        }
        let cx = dot(&orig.c, &xc);
        if cx < -1e-12 {
            // Unboundedness certificate: s in K, Ax + s = 0, c'x = -1.
            let scale = -1.0 / cx;
            let mut rp: Vec<f64> = sc.iter().map(|z| z * scale).collect();
            orig.a.matvec_acc(&xc, scale, &mut rp);
            if inf_norm(&rp) <= opts.tol.feasibility * (1.0 + norm_b) {
                let x: Vec<f64> = xc.iter().map(|z| z * scale).collect();
                return Ok(ConicSolution {
                    status: SolveStatus::Unbounded,
                    x,
                    row_duals: vec![0.0; n_rows_src],
                    y: vec![0.0; m],
                    s: sc.iter().map(|z| z * scale).collect(),
                    objective: f64::NEG_INFINITY,
                    iterations,
                    wall_time: start.elapsed(),
                    residuals: ResidualReport::default(),
                });
            }
        }

        if let Some(limit) = opts.time_limit {
            if start.elapsed() > limit {
                break;
            }
        }

        advance(
            &mut u, &mut v, &gu, &gv, &mut packed_g, &mut packed_f, &mut aa, &mut fallback,
            &mut last_was_aa,
        );
    }

    let _ = scaled_a;
    let (x, y, s, rep, cx) = best.unwrap_or_else(|| {
        let tau = u[total - 1].max(1e-10);
        let (x, y, s) = unscale(&u, &v, tau);
        (x, y, s, ResidualReport { primal: 1.0, dual: 1.0, gap: 1.0 }, 0.0)
    });
    let row_duals = (0..n_rows_src).map(|k| y[orig.map.row_of[k]]).collect();
    Ok(ConicSolution {
        status,
        x,
        row_duals,
        y,
        s,
        objective: cx + obj_constant,
        iterations,
        wall_time: start.elapsed(),
        residuals: rep,
    })
}
