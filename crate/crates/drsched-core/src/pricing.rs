//! Price data pipeline: scenario generation/ingest, moment estimation,
//! support box, and data-driven ambiguity parameters.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use conic::{solve, ConicProgram, LinExpr, SolveStatus, SolverOptions};

use crate::system_model::{
    add_network_constraints, BalanceForm, NetworkCase, ScheduleVars,
};
use crate::PricingError;

/// Price samples, `M x (G*T)`, flattened unit-major (`g * T + t`).
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub samples: Vec<Vec<f64>>,
    pub dim: usize,
}

impl ScenarioSet {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        if self.samples.is_empty() {
            return Err(PricingError::Parameter("scenario set is empty".into()));
        }
        for (j, row) in self.samples.iter().enumerate() {
            if row.len() != self.dim {
                return Err(PricingError::Parameter(format!(
                    "sample {j} has {} entries, expected {}",
                    row.len(),
                    self.dim
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(PricingError::Parameter(format!("sample {j} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Restricts every sample to the given coordinate subset (in order).
    pub fn slice(&self, coords: &[usize]) -> ScenarioSet {
        ScenarioSet {
            samples: self
                .samples
                .iter()
                .map(|row| coords.iter().map(|&k| row[k]).collect())
                .collect(),
            dim: coords.len(),
        }
    }
}

/// First and second empirical moments with the applied regularization.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub regularization_added: f64,
}

/// Componentwise sample bounds; the polyhedral support is
/// `{lambda : A lambda <= B}` with `A = [I; -I]`, `B = [plus; -minus]`.
#[derive(Debug, Clone)]
pub struct SupportBox {
    pub lambda_minus: Vec<f64>,
    pub lambda_plus: Vec<f64>,
}

impl SupportBox {
    pub fn dim(&self) -> usize {
        self.lambda_minus.len()
    }

    /// The stacked right-hand side `B = [plus; -minus]` (length `2 dim`).
    pub fn stacked_b(&self) -> Vec<f64> {
        let mut b = self.lambda_plus.clone();
        b.extend(self.lambda_minus.iter().map(|v| -v));
        b
    }

    pub fn contains(&self, lambda: &[f64], tol: f64) -> bool {
        lambda.len() == self.dim()
            && lambda.iter().enumerate().all(|(k, &v)| {
                v >= self.lambda_minus[k] - tol && v <= self.lambda_plus[k] + tol
            })
    }

    pub fn degenerate(point: &[f64]) -> Self {
        Self { lambda_minus: point.to_vec(), lambda_plus: point.to_vec() }
    }
}

/// Validity caveats attached to ambiguity parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AmbiguityFlags {
    /// Sample count at or below the theoretical threshold (the paper's bound
    /// does not certify the confidence level).
    pub insufficient_samples: bool,
    /// The dimension term inside the covariance radius was clamped at zero.
    pub alpha_sqrt_clamped: bool,
}

/// Data-driven ambiguity-set parameters.
#[derive(Debug, Clone)]
pub struct AmbiguityParams {
    pub delta: f64,
    pub delta_bar: f64,
    pub r_hat: f64,
    pub r_bar: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub m_bar: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub flags: AmbiguityFlags,
}

impl AmbiguityParams {
    /// Parameters of a collapsed ambiguity set: exact moments, no slack.
    pub fn degenerate(delta: f64) -> Self {
        Self {
            delta,
            delta_bar: 1.0 - (1.0 - delta).sqrt(),
            r_hat: 0.0,
            r_bar: 0.0,
            alpha_bar: 0.0,
            beta_bar: 0.0,
            m_bar: 0.0,
            gamma1: 0.0,
            gamma2: 1.0,
            flags: AmbiguityFlags::default(),
        }
    }

    /// Direct construction for sensitivity studies.
    pub fn with_gammas(gamma1: f64, gamma2: f64) -> Self {
        Self { gamma1, gamma2, ..Self::degenerate(0.2) }
    }
}

// --- moments ----------------------------------------------------------------

/// Default regularization target: `1e-6 tr(Sigma)/dim`, floored at `1e-8`
/// so zero-variance sample sets still produce a positive definite matrix.
pub fn default_eps_reg(sigma: &DMatrix<f64>) -> f64 {
    let dim = sigma.nrows().max(1) as f64;
    (1e-6 * sigma.trace() / dim).max(1e-8)
}

/// Empirical mean and covariance (`1/M` normalization); adds `eps I` when
/// the smallest eigenvalue falls below `eps`, and records what was added.
pub fn estimate_moments(s: &ScenarioSet, eps_reg: Option<f64>) -> Result<MomentEstimate, PricingError> {
    s.validate()?;
    let m = s.n_samples();
    let d = s.dim;
    let mut mu = DVector::zeros(d);
    for row in &s.samples {
        for k in 0..d {
            mu[k] += row[k];
        }
    }
    mu /= m as f64;
    let mut sigma = DMatrix::zeros(d, d);
    for row in &s.samples {
        for i in 0..d {
            let di = row[i] - mu[i];
            for j in i..d {
                sigma[(i, j)] += di * (row[j] - mu[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = sigma[(i, j)] / m as f64;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    let eps = eps_reg.unwrap_or_else(|| default_eps_reg(&sigma));
    let min_eig = conic::sym_eigen(&sigma).values.iter().copied().fold(f64::INFINITY, f64::min);
    let added = if min_eig >= eps { 0.0 } else { eps };
    if added > 0.0 {
        for i in 0..d {
            sigma[(i, i)] += added;
        }
    }
    Ok(MomentEstimate { mu, sigma, regularization_added: added })
}

/// Symmetric matrix power via eigendecomposition, eigenvalues clamped below
/// at `floor` before exponentiation.
pub fn sym_matrix_power(m: &DMatrix<f64>, exponent: f64, floor: f64) -> DMatrix<f64> {
    let e = conic::sym_eigen(m);
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let lam = e.values[k].max(floor);
        let scale = lam.powf(exponent);
        let col = e.vectors.column(k);
        for i in 0..d {
            for j in i..d {
                out[(i, j)] += scale * col[i] * col[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

// --- support box ------------------------------------------------------------

pub fn support_box(s: &ScenarioSet) -> Result<SupportBox, PricingError> {
    s.validate()?;
    let d = s.dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in &s.samples {
        for k in 0..d {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    Ok(SupportBox { lambda_minus: lo, lambda_plus: hi })
}

// --- ambiguity parameters ----------------------------------------------------

/// Computes the confidence-driven ambiguity parameters from moments, support
/// and sample count.
///
/// The whitened support radius uses the closed form: with
/// `l = Sigma^{-1/2}(minus - mu)` and `u = Sigma^{-1/2}(plus - mu)`, the
/// radius is the norm of the componentwise `max(|l|, |u|)` (box corners are
/// the extreme points of a coordinate-separable norm).
///
/// Degenerate regimes are flagged rather than silently patched; only
/// `alpha_bar + beta_bar >= 1` is a hard error since the resulting gamma
/// values would be meaningless.
pub fn ambiguity_params(
    m: &MomentEstimate,
    support: &SupportBox,
    delta: f64,
    n_samples: usize,
) -> Result<AmbiguityParams, PricingError> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(PricingError::Parameter(format!("delta must be in (0,1), got {delta}")));
    }
    let d = m.mu.len();
    if support.dim() != d {
        return Err(PricingError::Parameter("support box dimension mismatch".into()));
    }
    let msamp = n_samples as f64;
    let mut flags = AmbiguityFlags::default();

    let delta_bar = 1.0 - (1.0 - delta).sqrt();
    let r_hat = whitened_radius(m, support);

    let ln4 = (4.0 / delta).ln();
    let ln2 = (2.0 / delta).ln();
    let c4 = 2.0 + (2.0 * ln4).sqrt();
    let inner = 1.0 - (r_hat * r_hat + 2.0) * c4 / msamp.sqrt();
    let r_bar = if inner > 0.0 {
        r_hat / inner.sqrt()
    } else {
        flags.insufficient_samples = true;
        r_hat
    };

    let dim_term = 1.0 - d as f64 / (r_bar.powi(4)).max(f64::MIN_POSITIVE);
    let sqrt_term = if dim_term >= 0.0 {
        dim_term.sqrt()
    } else {
        flags.alpha_sqrt_clamped = true;
        0.0
    };
    let alpha_bar = (r_bar * r_bar / msamp.sqrt()) * (sqrt_term + ln4.sqrt());
    let beta_bar = (r_bar * r_bar / msamp.sqrt()) * (2.0 + (2.0 * ln2).sqrt()).powi(2);

    let m_bar_1 = (r_hat * r_hat + 2.0).powi(2) * c4 * c4;
    let denom = (r_bar.powi(4) + r_bar).powi(2);
    let m_bar_2 = if denom > 0.0 {
        (8.0 + (32.0 * ln4).sqrt()).powi(2) / denom
    } else {
        f64::INFINITY
    };
    let m_bar = m_bar_1.max(m_bar_2);
    if msamp <= m_bar {
        flags.insufficient_samples = true;
    }

    if alpha_bar + beta_bar >= 1.0 {
        return Err(PricingError::InvalidAmbiguity {
            m_bar,
            alpha_bar,
            beta_bar,
        });
    }
    let gamma1 = beta_bar / (1.0 - alpha_bar - beta_bar);
    let gamma2 = (1.0 + beta_bar) / (1.0 - alpha_bar - beta_bar);
    Ok(AmbiguityParams {
        delta,
        delta_bar,
        r_hat,
        r_bar,
        alpha_bar,
        beta_bar,
        m_bar,
        gamma1,
        gamma2,
        flags,
    })
}

fn whitened_radius(m: &MomentEstimate, support: &SupportBox) -> f64 {
    let d = m.mu.len();
    let inv_half = sym_matrix_power(&m.sigma, -0.5, 1e-12);
    let lo = DVector::from_iterator(d, support.lambda_minus.iter().copied()) - &m.mu;
    let hi = DVector::from_iterator(d, support.lambda_plus.iter().copied()) - &m.mu;
    let l = &inv_half * lo;
    let u = &inv_half * hi;
    (0..d).map(|k| l[k].abs().max(u[k].abs()).powi(2)).sum::<f64>().sqrt()
}

/// Smallest sample count for which the confidence formulas certify a valid
/// parameter set (`alpha_bar + beta_bar < 1` with margin); used by the
/// experiment pipeline as an effective sample size when the actual sample
/// count is far below the theoretical threshold.
pub fn effective_sample_size(m: &MomentEstimate, support: &SupportBox, delta: f64, actual: usize) -> usize {
    let r_hat = whitened_radius(m, support);
    let c4 = 2.0 + (2.0 * (4.0f64 / delta).ln()).sqrt();
    let m_bar_1 = (r_hat * r_hat + 2.0).powi(2) * c4 * c4;
    let boosted = (100.0 * m_bar_1).ceil() as usize + 1;
    actual.max(boosted)
}

// --- scenario generation ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    Uniform,
    Normal,
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    /// Relative fluctuation magnitude (uniform half-width or normal stddev).
    pub sigma_rel: f64,
    pub family: NoiseFamily,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma_rel: 0.15, family: NoiseFamily::Uniform }
    }
}

/// Base locational prices: duals of the demand-serving dispatch LP
/// (minimize total modeled cost with every bus balance held at equality).
///
/// Returns the `G*T` unit-major price vector.
pub fn base_prices(case: &NetworkCase, segments: usize) -> Result<Vec<f64>, PricingError> {
    let mut pb = ConicProgram::new();
    let vars = ScheduleVars::create(&mut pb, case);
    let (_, balance) =
        add_network_constraints(&mut pb, case, segments, &vars, BalanceForm::ServeDemand)
            .map_err(PricingError::Case)?;
    let mut obj = LinExpr::new();
    for zrow in &vars.z {
        for &z in zrow {
            obj.add_term(z, 1.0);
        }
    }
    pb.set_objective(obj);
    let sol = solve(&pb, &SolverOptions::with_tol(1e-7, 1e-7)).map_err(PricingError::Conic)?;
    if sol.status != SolveStatus::Optimal {
        return Err(PricingError::BaseDispatch(format!(
            "demand-serving dispatch is {}",
            sol.status.as_str()
        )));
    }
    // Shadow price of one extra MW of demand at bus i: d(cost)/d(rhs) = -dual.
    let mut out = Vec::with_capacity(case.price_dim());
    for gen in &case.generators {
        for t in 0..case.horizon {
            out.push(-sol.row_duals[balance[gen.bus][t].0]);
        }
    }
    Ok(out)
}

/// Draws `m` price samples around the base locational prices:
/// `lambda_j = base * (1 + eps)`, `eps` from the chosen family, clamped so
/// prices stay nonnegative. Deterministic for a fixed seed.
pub fn generate_scenarios(
    case: &NetworkCase,
    m: usize,
    noise: NoiseSpec,
    seed: u64,
    segments: usize,
) -> Result<ScenarioSet, PricingError> {
    if m == 0 {
        return Err(PricingError::Parameter("sample count must be >= 1".into()));
    }
    if noise.sigma_rel < 0.0 {
        return Err(PricingError::Parameter("noise level must be >= 0".into()));
    }
    let base = base_prices(case, segments)?;
    let dim = base.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.sigma_rel.max(f64::MIN_POSITIVE)).unwrap();
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = Vec::with_capacity(dim);
        for &b in &base {
            let eps = match noise.family {
                NoiseFamily::Uniform => {
                    if noise.sigma_rel == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-noise.sigma_rel..=noise.sigma_rel)
                    }
                }
                NoiseFamily::Normal => {
                    if noise.sigma_rel == 0.0 {
                        0.0
                    } else {
                        normal.sample(&mut rng)
                    }
                }
            };
            row.push((b * (1.0 + eps)).max(0.0));
        }
        samples.push(row);
    }
    Ok(ScenarioSet { samples, dim })
}

// --- CSV interchange -----------------------------------------------------------

/// Writes the `M x (G*T)` sample matrix with `u<g>_t<t>` headers (1-based).
pub fn write_scenarios_csv(
    path: &Path,
    set: &ScenarioSet,
    n_gens: usize,
    horizon: usize,
) -> Result<(), PricingError> {
    if n_gens * horizon != set.dim {
        return Err(PricingError::Parameter("header shape does not match samples".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| PricingError::Io(e.to_string()))?;
    let header: Vec<String> = (0..n_gens)
        .flat_map(|g| (0..horizon).map(move |t| format!("u{}_t{}", g + 1, t + 1)))
        .collect();
    w.write_record(&header).map_err(|e| PricingError::Io(e.to_string()))?;
    for row in &set.samples {
        let rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        w.write_record(&rec).map_err(|e| PricingError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| PricingError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_scenarios_csv(path: &Path) -> Result<ScenarioSet, PricingError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| PricingError::Io(e.to_string()))?;
    let dim = r.headers().map_err(|e| PricingError::Io(e.to_string()))?.len();
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| PricingError::Io(e.to_string()))?;
        let row: Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        samples.push(row.map_err(|e| PricingError::Io(format!("bad number: {e}")))?);
    }
    let set = ScenarioSet { samples, dim };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture_path;
    use crate::system_model::{parse_case, GeneratorSpec, Line};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn set(rows: &[&[f64]]) -> ScenarioSet {
        ScenarioSet { samples: rows.iter().map(|r| r.to_vec()).collect(), dim: rows[0].len() }
    }

    #[test]
    fn moments_hand_example() {
        // samples {(1,2),(3,4)} -> mu = (2,3), Sigma = [[1,1],[1,1]] + eps I.
        let m = estimate_moments(&set(&[&[1.0, 2.0], &[3.0, 4.0]]), Some(1e-9)).unwrap();
        assert_abs_diff_eq!(m.mu[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mu[1], 3.0, epsilon = 1e-12);
        for (i, j, want) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)] {
            let extra = if i == j { m.regularization_added } else { 0.0 };
            assert_abs_diff_eq!(m.sigma[(i, j)], want + extra, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(m.regularization_added, 1e-9, epsilon = 1e-15);
    }

    #[test]
    fn moments_single_sample_is_pure_regularization() {
        let m = estimate_moments(&set(&[&[5.0, 7.0]]), Some(1e-6)).unwrap();
        assert_abs_diff_eq!(m.regularization_added, 1e-6, epsilon = 1e-18);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1e-6 } else { 0.0 };
                assert_abs_diff_eq!(m.sigma[(i, j)], want, epsilon = 1e-18);
            }
        }
    }

    #[test]
    fn moments_symmetric_and_positive_definite() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> =
            (0..40).map(|_| (0..5).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let s = ScenarioSet { samples: rows, dim: 5 };
        let m = estimate_moments(&s, None).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(m.sigma[(i, j)], m.sigma[(j, i)], epsilon = 1e-14);
            }
        }
        let min =
            conic::sym_eigen(&m.sigma).values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= default_eps_reg(&m.sigma) * 0.99 || m.regularization_added == 0.0);
        assert!(min > 0.0);
    }

    #[test]
    fn support_box_examples() {
        let b = support_box(&set(&[&[1.0, 2.0], &[3.0, 0.0]])).unwrap();
        assert_eq!(b.lambda_minus, vec![1.0, 0.0]);
        assert_eq!(b.lambda_plus, vec![3.0, 2.0]);

        let single = support_box(&set(&[&[4.0, 5.0]])).unwrap();
        assert_eq!(single.lambda_minus, single.lambda_plus);

        // every sample satisfies the stacked inequality A lambda <= B.
        let s = set(&[&[1.0, 2.0], &[3.0, 0.0], &[2.0, 1.0]]);
        let b = support_box(&s).unwrap();
        for row in &s.samples {
            assert!(b.contains(row, 0.0));
        }
    }

    #[test]
    fn delta_bar_arithmetic() {
        let m = estimate_moments(&set(&[&[1.0], &[2.0], &[1.5]]), None).unwrap();
        let b = support_box(&set(&[&[1.0], &[2.0], &[1.5]])).unwrap();
        let p = ambiguity_params(&m, &b, 0.2, 10_000_000).unwrap();
        assert_abs_diff_eq!(p.delta_bar, 1.0 - 0.8f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.delta_bar, 0.105573, epsilon = 1e-6);
    }

    #[test]
    fn whitened_radius_identity_example() {
        // mu = 0, Sigma = I, box [-1, 2]^2: radius = ||(2,2)|| = 2 sqrt(2).
        let m = MomentEstimate {
            mu: DVector::zeros(2),
            sigma: DMatrix::identity(2, 2),
            regularization_added: 0.0,
        };
        let b = SupportBox { lambda_minus: vec![-1.0, -1.0], lambda_plus: vec![2.0, 2.0] };
        let r = whitened_radius(&m, &b);
        assert_abs_diff_eq!(r, 2.0 * 2.0f64.sqrt(), epsilon = 1e-12);
    }

    /// Brute-force oracle for the boxed program the closed form solves:
    /// maximize ||zeta|| over the whitened box [l, u]; the maximum of a
    /// convex norm over a box sits at one of its 2^d corners.
    fn corner_radius(m: &MomentEstimate, b: &SupportBox) -> f64 {
        let d = m.mu.len();
        let inv_half = sym_matrix_power(&m.sigma, -0.5, 1e-12);
        let l = &inv_half
            * (DVector::from_iterator(d, b.lambda_minus.iter().copied()) - &m.mu);
        let u = &inv_half
            * (DVector::from_iterator(d, b.lambda_plus.iter().copied()) - &m.mu);
        let mut best: f64 = 0.0;
        for mask in 0..(1u32 << d) {
            let norm2: f64 = (0..d)
                .map(|k| if mask >> k & 1 == 1 { u[k] * u[k] } else { l[k] * l[k] })
                .sum();
            best = best.max(norm2.sqrt());
        }
        best
    }

    #[test]
    fn whitened_radius_matches_corner_bruteforce() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for d in [1usize, 2, 3, 5, 8, 12] {
            let rows: Vec<Vec<f64>> = (0..30)
                .map(|_| (0..d).map(|_| rng.random_range(1.0..9.0)).collect())
                .collect();
            let s = ScenarioSet { samples: rows, dim: d };
            let m = estimate_moments(&s, None).unwrap();
            let b = support_box(&s).unwrap();
            let closed = whitened_radius(&m, &b);
            let brute = corner_radius(&m, &b);
            assert!(
                (closed - brute).abs() <= 1e-8 * brute.max(1.0),
                "d={d}: closed {closed} vs brute {brute}"
            );
        }
    }

    #[test]
    fn ambiguity_collapses_with_more_samples() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> =
            (0..50).map(|_| (0..3).map(|_| rng.random_range(2.0..8.0)).collect()).collect();
        let s = ScenarioSet { samples: rows, dim: 3 };
        let m = estimate_moments(&s, None).unwrap();
        let b = support_box(&s).unwrap();
        let mut last_g1 = f64::INFINITY;
        let mut last_g2 = f64::INFINITY;
        for msize in [1_000_000usize, 1_000_000_000, 1_000_000_000_000] {
            let p = ambiguity_params(&m, &b, 0.2, msize).unwrap();
            assert!(p.gamma1 <= last_g1 + 1e-12);
            assert!(p.gamma2 <= last_g2 + 1e-12);
            assert!(p.gamma2 >= 1.0);
            last_g1 = p.gamma1;
            last_g2 = p.gamma2;
        }
        assert!(last_g1 < 1e-2, "gamma1 should collapse toward 0, got {last_g1}");
        assert!((last_g2 - 1.0).abs() < 1e-2, "gamma2 should collapse toward 1, got {last_g2}");
    }

    #[test]
    fn ambiguity_rejects_insufficient_samples() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..30).map(|_| (0..4).map(|_| rng.random_range(2.0..8.0)).collect()).collect();
        let s = ScenarioSet { samples: rows, dim: 4 };
        let m = estimate_moments(&s, None).unwrap();
        let b = support_box(&s).unwrap();
        let err = ambiguity_params(&m, &b, 0.2, 30).unwrap_err();
        match err {
            PricingError::InvalidAmbiguity { m_bar, .. } => assert!(m_bar > 30.0),
            other => panic!("expected invalid ambiguity, got {other}"),
        }
        // The documented effective size always certifies.
        let m_eff = effective_sample_size(&m, &b, 0.2, 30);
        let p = ambiguity_params(&m, &b, 0.2, m_eff).unwrap();
        assert!(p.gamma2 >= 1.0 && p.gamma1 >= 0.0);
    }

    fn congestion_case() -> crate::system_model::NetworkCase {
        // Cheap unit at bus 1, expensive at bus 2, all load at bus 2; a
        // 30 MW line forces the expensive unit to cover the remainder.
        crate::system_model::NetworkCase {
            name: "lmp2".into(),
            n_buses: 2,
            lines: vec![Line { from: 0, to: 1, x: 0.1, fmax: Some(30.0) }],
            generators: vec![
                GeneratorSpec {
                    bus: 0,
                    p_min: 0.0,
                    p_max: 100.0,
                    a: 0.0,
                    b: 10.0,
                    c: 0.0,
                    ramp_up: 100.0,
                    ramp_down: 100.0,
                    p_initial: None,
                },
                GeneratorSpec {
                    bus: 1,
                    p_min: 0.0,
                    p_max: 100.0,
                    a: 0.0,
                    b: 30.0,
                    c: 0.0,
                    ramp_up: 100.0,
                    ramp_down: 100.0,
                    p_initial: None,
                },
            ],
            loads: vec![vec![0.0], vec![80.0]],
            ref_bus: 0,
            horizon: 1,
        }
    }

    #[test]
    fn base_prices_are_congestion_aware_duals() {
        // With the line binding, marginal demand at bus 1 costs 10 $/MWh
        // (cheap unit) and at bus 2 costs 30 $/MWh (local unit).
        let prices = base_prices(&congestion_case(), 1).unwrap();
        assert_eq!(prices.len(), 2);
        assert_abs_diff_eq!(prices[0], 10.0, epsilon = 1e-4);
        assert_abs_diff_eq!(prices[1], 30.0, epsilon = 1e-4);
    }

    #[test]
    fn scenarios_zero_noise_replicates_base() {
        let case = parse_case(&fixture_path("case6.json")).unwrap();
        let s = generate_scenarios(
            &case,
            4,
            NoiseSpec { sigma_rel: 0.0, family: NoiseFamily::Uniform },
            1,
            5,
        )
        .unwrap();
        let base = base_prices(&case, 5).unwrap();
        assert_eq!(s.n_samples(), 4);
        for row in &s.samples {
            for (a, b) in row.iter().zip(&base) {
                assert_abs_diff_eq!(a, b, epsilon = 0.0);
            }
        }
        // Zero variance triggers the regularization floor downstream.
        let m = estimate_moments(&s, None).unwrap();
        assert!(m.regularization_added > 0.0);
    }

    #[test]
    fn scenarios_deterministic_per_seed() {
        let case = parse_case(&fixture_path("case6.json")).unwrap();
        let spec = NoiseSpec::default();
        let a = generate_scenarios(&case, 7, spec, 42, 5).unwrap();
        let b = generate_scenarios(&case, 7, spec, 42, 5).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = generate_scenarios(&case, 7, spec, 43, 5).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn scenario_csv_roundtrip() {
        let case = parse_case(&fixture_path("case6.json")).unwrap();
        let s = generate_scenarios(&case, 5, NoiseSpec::default(), 9, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scen.csv");
        write_scenarios_csv(&path, &s, case.n_gens(), case.horizon).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("u1_t1,"));
        let back = read_scenarios_csv(&path).unwrap();
        assert_eq!(back.dim, s.dim);
        assert_eq!(back.n_samples(), 5);
        for (ra, rb) in back.samples.iter().zip(&s.samples) {
            for (a, b) in ra.iter().zip(rb) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }
}
