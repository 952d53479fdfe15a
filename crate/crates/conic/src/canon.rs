//! Canonicalization of a [`ConicProgram`] into the standard form
//!
//! ```text
//! minimize    c'x
//! subject to  b - A x  in  K,    K = {0}^mz x R+^ml x SOC(d1) x ... x PSD(n1) x ...
//! ```
//!
//! Rows are laid out cone-by-cone: equalities first, then one-sided linear
//! rows and finite variable bounds, then SOC blocks (scalar entry first),
//! then PSD blocks as scaled upper triangles (`svec`, off-diagonals times
//! sqrt(2) so the cone is self-dual under the Euclidean inner product).

use crate::expr::LinExpr;
use crate::program::{ConicProgram, RowId, Sense};
use crate::sparse::Csr;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Cone layout of the canonical row vector.
#[derive(Debug, Clone, Default)]
pub struct ConeLayout {
    pub n_zero: usize,
    pub n_nonneg: usize,
    /// Full SOC dimensions (scalar + vector length), in row order.
    pub socs: Vec<usize>,
    /// PSD matrix dimensions; each occupies `d(d+1)/2` svec rows.
    pub psds: Vec<usize>,
}

impl ConeLayout {
    pub fn total_rows(&self) -> usize {
        self.n_zero
            + self.n_nonneg
            + self.socs.iter().sum::<usize>()
            + self.psds.iter().map(|d| d * (d + 1) / 2).sum::<usize>()
    }

    pub fn soc_offset(&self, k: usize) -> usize {
        self.n_zero + self.n_nonneg + self.socs[..k].iter().sum::<usize>()
    }

    pub fn psd_offset(&self, k: usize) -> usize {
        self.n_zero
            + self.n_nonneg
            + self.socs.iter().sum::<usize>()
            + self.psds[..k].iter().map(|d| d * (d + 1) / 2).sum::<usize>()
    }
}

/// Maps entities of the source program to canonical row indices.
#[derive(Debug, Clone, Default)]
pub struct CanonMap {
    /// Canonical row index of each source linear row.
    pub row_of: Vec<usize>,
    /// Canonical rows of finite lower/upper variable bounds (var index keyed).
    pub lower_of: Vec<Option<usize>>,
    pub upper_of: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct Canonical {
    pub a: Csr,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub layout: ConeLayout,
    pub map: CanonMap,
}

impl Canonical {
    pub fn row_dual(&self, y: &[f64], row: RowId) -> f64 {
        y[self.map.row_of[row.0]]
    }
}

/// Diagonal congruence weights for one PSD block: symmetric Ruiz passes on
/// the matrix of per-entry coefficient magnitudes.
fn congruence_weights(blk: &crate::program::PsdBlock) -> Vec<f64> {
    let d = blk.dim;
    let mut scale = vec![vec![0.0f64; d]; d];
    for j in 0..d {
        for i in 0..=j {
            let e = blk.entry(i, j);
            let mut m = e.constant.abs();
            for &(_, c) in &e.terms {
                m = m.max(c.abs());
            }
            scale[i][j] = m;
            scale[j][i] = m;
        }
    }
    let mut w = vec![1.0f64; d];
    for _ in 0..6 {
        let mut done = true;
        for i in 0..d {
            let mut row_max = 0.0f64;
            for j in 0..d {
                row_max = row_max.max(w[i] * scale[i][j] * w[j]);
            }
            if row_max > 0.0 {
                if (row_max - 1.0).abs() > 1e-2 {
                    done = false;
                }
                w[i] /= row_max.sqrt();
            }
        }
        if done {
            break;
        }
    }
    w
}

fn push_expr(rows: &mut Vec<Vec<(u32, f64)>>, b: &mut Vec<f64>, expr: &LinExpr, scale: f64) {
    // Encodes  s = scale * expr(x)  as  b - A x = s :
    //   A row = -scale * coeffs,  b = scale * constant.
    let mut r: Vec<(u32, f64)> = expr.terms.iter().map(|&(v, c)| (v.0, -scale * c)).collect();
    r.sort_unstable_by_key(|&(j, _)| j);
    rows.push(r);
    b.push(scale * expr.constant);
}

pub fn canonicalize(p: &ConicProgram) -> Canonical {
    let n = p.n_vars;
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut map = CanonMap {
        row_of: vec![usize::MAX; p.rows.len()],
        lower_of: vec![None; n],
        upper_of: vec![None; n],
    };

    // Zero cone: equality rows, as  s = rhs - expr(x) = 0.
    for (k, r) in p.rows.iter().enumerate() {
        if r.sense == Sense::Eq {
            map.row_of[k] = rows.len();
            let mut e = r.expr.scaled(-1.0);
            e.constant += r.rhs;
            push_expr(&mut rows, &mut b, &e, 1.0);
        }
    }
    let n_zero = rows.len();

    // Nonnegative cone: one-sided rows and finite bounds, as s = slack >= 0.
    for (k, r) in p.rows.iter().enumerate() {
        match r.sense {
            Sense::Le => {
                // rhs - expr >= 0
                map.row_of[k] = rows.len();
                let mut e = r.expr.scaled(-1.0);
                e.constant += r.rhs;
                push_expr(&mut rows, &mut b, &e, 1.0);
            }
            Sense::Ge => {
                // expr - rhs >= 0
                map.row_of[k] = rows.len();
                let mut e = r.expr.clone();
                e.constant -= r.rhs;
                push_expr(&mut rows, &mut b, &e, 1.0);
            }
            Sense::Eq => {}
        }
    }
    for v in 0..n {
        if p.lo[v].is_finite() {
            // b - Ax = x_v - lo >= 0
            map.lower_of[v] = Some(rows.len());
            rows.push(vec![(v as u32, -1.0)]);
            b.push(-p.lo[v]);
        }
        if p.hi[v].is_finite() {
            // b - Ax = hi - x_v >= 0
            map.upper_of[v] = Some(rows.len());
            rows.push(vec![(v as u32, 1.0)]);
            b.push(p.hi[v]);
        }
    }
    let n_nonneg = rows.len() - n_zero;

    // SOC blocks: scalar row first, then the vector rows.
    let mut socs = Vec::with_capacity(p.socs.len());
    for s in &p.socs {
        socs.push(s.vector.len() + 1);
        push_expr(&mut rows, &mut b, &s.scalar, 1.0);
        for e in &s.vector {
            push_expr(&mut rows, &mut b, e, 1.0);
        }
    }

    // PSD blocks: svec of the upper triangle, column-major. Each block is
    // emitted under a diagonal congruence W M W (equivalent to M >= 0) with
    // W chosen to balance the magnitudes of the affine entries, which the
    // cone-uniform row equilibration cannot do on its own.
    let mut psds = Vec::with_capacity(p.psds.len());
    for blk in &p.psds {
        psds.push(blk.dim);
        let w = congruence_weights(blk);
        for j in 0..blk.dim {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { SQRT2 };
                push_expr(&mut rows, &mut b, blk.entry(i, j), scale * w[i] * w[j]);
            }
        }
    }

    let a = Csr::from_rows(n, &rows);
    let mut c = vec![0.0; n];
    for &(v, coeff) in &p.objective.terms {
        c[v.idx()] += coeff;
    }

    Canonical { a, b, c, layout: ConeLayout { n_zero, n_nonneg, socs, psds }, map }
}
