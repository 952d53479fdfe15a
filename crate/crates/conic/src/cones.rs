//! Cone projections for the canonical layout.
//!
//! The solver projects the dual iterate onto `K* = R^mz x R+^ml x SOC x PSD`
//! (zero-cone rows have free duals; the remaining cones are self-dual).

use nalgebra::DMatrix;

use crate::canon::{ConeLayout, SQRT2};
use crate::eig::sym_eigen;

/// Projects `v` (length = layout rows) onto `K*` in place.
pub fn project_dual_cone(layout: &ConeLayout, v: &mut [f64]) {
    let mut off = layout.n_zero; // zero-cone duals are free
    for x in v[off..off + layout.n_nonneg].iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    off += layout.n_nonneg;
    for &d in &layout.socs {
        project_soc(&mut v[off..off + d]);
        off += d;
    }
    for &d in &layout.psds {
        let len = d * (d + 1) / 2;
        project_psd_svec(d, &mut v[off..off + len]);
        off += len;
    }
}

/// Euclidean projection onto the second-order cone `{(t, u) : ||u|| <= t}`.
pub fn project_soc(block: &mut [f64]) {
    if block.is_empty() {
        return;
    }
    let t = block[0];
    let nu = block[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if nu <= t {
        return; // inside
    }
    if nu <= -t {
        block.iter_mut().for_each(|v| *v = 0.0); // polar interior
        return;
    }
    let alpha = 0.5 * (1.0 + t / nu);
    block[0] = alpha * nu;
    for v in block[1..].iter_mut() {
        *v *= alpha;
    }
}

/// Unpacks an svec block (upper triangle, column-major, off-diagonals scaled
/// by sqrt(2)) into a dense symmetric matrix.
pub fn svec_to_mat(d: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in 0..=j {
            let val = if i == j { v[k] } else { v[k] / SQRT2 };
            m[(i, j)] = val;
            m[(j, i)] = val;
            k += 1;
        }
    }
    m
}

/// Packs a symmetric matrix into svec form.
pub fn mat_to_svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let d = m.nrows();
    let mut k = 0;
    for j in 0..d {
        for i in 0..=j {
            out[k] = if i == j { m[(i, j)] } else { SQRT2 * m[(i, j)] };
            k += 1;
        }
    }
}

/// Euclidean projection onto the PSD cone in svec coordinates.
///
/// Reconstructs from whichever eigenvalue side (positive or negative) has
/// fewer members, which is much cheaper near convergence where the active
/// face has low rank.
pub fn project_psd_svec(d: usize, v: &mut [f64]) {
    if d == 0 {
        return;
    }
    if d == 1 {
        if v[0] < 0.0 {
            v[0] = 0.0;
        }
        return;
    }
    let m = svec_to_mat(d, v);
    let e = sym_eigen(&m);
    let pos: Vec<usize> = (0..d).filter(|&k| e.values[k] > 0.0).collect();
    let neg: Vec<usize> = (0..d).filter(|&k| e.values[k] < 0.0).collect();
    if neg.is_empty() {
        return;
    }
    if pos.is_empty() {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    // Positive part directly, or M minus its negative part: use whichever
    // eigenvalue side is smaller.
    let proj = if pos.len() <= neg.len() {
        low_rank(&e.vectors, &e.values, &pos)
    } else {
        let mut p = m;
        p += low_rank(&e.vectors, &e.values, &neg);
        p
    };
    mat_to_svec(&proj, v);
}

/// `sum_k |lambda_k| v_k v_k'` over the selected eigenpairs.
fn low_rank(vecs: &DMatrix<f64>, vals: &[f64], idx: &[usize]) -> DMatrix<f64> {
    let d = vecs.nrows();
    let r = idx.len();
    let mut u = DMatrix::zeros(d, r);
    for (c, &k) in idx.iter().enumerate() {
        let scale = vals[k].abs().sqrt();
        for i in 0..d {
            u[(i, c)] = vecs[(i, k)] * scale;
        }
    }
    let mut out = DMatrix::zeros(d, d);
    out.gemm(1.0, &u, &u.transpose(), 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn psd_projection_matches_full_eig_reference() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        for d in [1usize, 2, 3, 6, 9] {
            for _ in 0..20 {
                let mut m = DMatrix::<f64>::zeros(d, d);
                for i in 0..d {
                    for j in i..d {
                        let v = rng.random_range(-2.0..2.0);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                let mut sv = vec![0.0; d * (d + 1) / 2];
                mat_to_svec(&m, &mut sv);
                project_psd_svec(d, &mut sv);
                let got = svec_to_mat(d, &sv);
                // reference: clamp all eigenvalues at zero
                let e = sym_eigen(&m);
                let mut want = DMatrix::<f64>::zeros(d, d);
                for k in 0..d {
                    let lam = e.values[k].max(0.0);
                    if lam > 0.0 {
                        let col = e.vectors.column(k);
                        for i in 0..d {
                            for j in 0..d {
                                want[(i, j)] += lam * col[i] * col[j];
                            }
                        }
                    }
                }
                let err = (&got - &want).amax();
                assert!(err < 1e-12, "d={d}: projection error {err}");
            }
        }
    }
}
