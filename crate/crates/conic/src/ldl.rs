//! Sparse LDL' factorization of the quasidefinite augmented system
//!
//! ```text
//!   K = [ I   A' ]
//!       [ A  -I  ]
//! ```
//!
//! Quasidefiniteness guarantees an LDL' factorization exists for any
//! symmetric permutation, so no pivoting is needed; a small dynamic
//! regularization keeps D away from zero in degenerate cases.
//!
//! The fill-reducing permutation is a static-degree order with dense-node
//! postponement: nodes are eliminated in ascending order of their degree in
//! K (ties by index), except that nodes whose degree exceeds a threshold are
//! moved to the end. For the augmented systems produced by this crate, the
//! postponed set is exactly the handful of dense coupling rows (norm rows of
//! large SOC blocks, matrix-inequality corner rows), which keeps fill low
//! without a full minimum-degree pass.

use crate::sparse::Csr;
use crate::ConicError;

pub struct LdlFactor {
    n: usize,
    /// perm[new] = old node index (elimination order).
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
    d: Vec<f64>,
    work: Vec<f64>,
}

/// Builds the ordering for the augmented system of `a` (n variables, m rows).
fn ordering(n: usize, a: &Csr) -> Vec<usize> {
    let total = n + a.m;
    let mut degree = vec![0usize; total];
    for i in 0..a.m {
        let (idx, _) = a.row(i);
        degree[n + i] += idx.len();
        for &j in idx {
            degree[j as usize] += 1;
        }
    }
    let mean = (2 * a.nnz()) as f64 / total.max(1) as f64;
    let threshold = (8.0 * mean).max(128.0) as usize;
    let mut nodes: Vec<usize> = (0..total).collect();
    nodes.sort_by_key(|&k| (degree[k] > threshold, degree[k], k));
    nodes
}

impl LdlFactor {
    /// Factorizes the augmented system for the (already scaled) matrix `a`.
    pub fn new(a: &Csr) -> Result<Self, ConicError> {
        let n = a.n;
        let m = a.m;
        let total = n + m;
        let perm = ordering(n, a);
        let mut iperm = vec![0usize; total];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Assemble the upper triangle of P K P' in CSC (column-sorted).
        // Entries: K[k,k] = +1 (k < n), -1 (k >= n); K[n+i, j] = a_ij.
        let nnz_est = total + a.nnz();
        let mut entries: Vec<(u32, u32, f64)> = Vec::with_capacity(nnz_est);
        for k in 0..total {
            let p = iperm[k] as u32;
            let v = if k < n { 1.0 } else { -1.0 };
            entries.push((p, p, v));
        }
        for i in 0..m {
            let (idx, val) = a.row(i);
            let pr = iperm[n + i] as u32;
            for (j, v) in idx.iter().zip(val) {
                let pc = iperm[*j as usize] as u32;
                let (lo, hi) = if pr <= pc { (pr, pc) } else { (pc, pr) };
                entries.push((lo, hi, *v));
            }
        }
        // CSC by column = hi index.
        let mut colcount = vec![0usize; total + 1];
        for &(_, c, _) in &entries {
            colcount[c as usize + 1] += 1;
        }
        for k in 0..total {
            colcount[k + 1] += colcount[k];
        }
        let ap = colcount.clone();
        let mut fill = ap.clone();
        let mut ai = vec![0u32; entries.len()];
        let mut ax = vec![0.0f64; entries.len()];
        for &(r, c, v) in &entries {
            let pos = fill[c as usize];
            ai[pos] = r;
            ax[pos] = v;
            fill[c as usize] += 1;
        }
        for k in 0..total {
            let lo = ap[k];
            let hi = ap[k + 1];
            let mut col: Vec<(u32, f64)> =
                ai[lo..hi].iter().copied().zip(ax[lo..hi].iter().copied()).collect();
            col.sort_unstable_by_key(|&(r, _)| r);
            for (off, (r, v)) in col.into_iter().enumerate() {
                ai[lo + off] = r;
                ax[lo + off] = v;
            }
        }

        // Symbolic: elimination tree and column counts (Davis, LDL).
        let mut parent = vec![usize::MAX; total];
        let mut lnz = vec![0usize; total];
        let mut flag = vec![usize::MAX; total];
        for k in 0..total {
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p] as usize;
                while i < k && flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; total + 1];
        for k in 0..total {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let lnz_total = lp[total];
        let mut li = vec![0u32; lnz_total];
        let mut lx = vec![0.0f64; lnz_total];
        let mut d = vec![0.0f64; total];

        // Numeric: up-looking factorization.
        let mut y = vec![0.0f64; total];
        let mut pattern = vec![0usize; total];
        let mut lfill = vec![0usize; total];
        let mut flag2 = vec![usize::MAX; total];
        for k in 0..total {
            let mut top = total;
            flag2[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p] as usize;
                if i > k {
                    continue;
                }
                y[i] += ax[p];
                let mut len = 0usize;
                while flag2[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag2[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for s in top..total {
                let i = pattern[s];
                let yi = y[i];
                y[i] = 0.0;
                let lo = lp[i];
                let hi = lo + lfill[i];
                for p in lo..hi {
                    y[li[p] as usize] -= lx[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                li[hi] = k as u32;
                lx[hi] = lki;
                lfill[i] += 1;
            }
            // Quasidefinite sign: +1 for variable nodes, -1 for row nodes.
            let sign = if perm[k] < n { 1.0 } else { -1.0 };
            if sign * dk < 1e-12 {
                dk = sign * 1e-8;
            }
            d[k] = dk;
        }

        Ok(LdlFactor { n: total, perm, lp, li, lx, d, work: vec![0.0; total] })
    }

    /// Solves `K z = w` in place (`w` holds the solution on return).
    pub fn solve_in_place(&mut self, w: &mut [f64]) {
        debug_assert_eq!(w.len(), self.n);
        let x = &mut self.work;
        for k in 0..self.n {
            x[k] = w[self.perm[k]];
        }
        for k in 0..self.n {
            let xk = x[k];
            if xk != 0.0 {
                for p in self.lp[k]..self.lp[k + 1] {
                    x[self.li[p] as usize] -= self.lx[p] * xk;
                }
            }
        }
        for k in 0..self.n {
            x[k] /= self.d[k];
        }
        for k in (0..self.n).rev() {
            let mut xk = x[k];
            for p in self.lp[k]..self.lp[k + 1] {
                xk -= self.lx[p] * x[self.li[p] as usize];
            }
            x[k] = xk;
        }
        for k in 0..self.n {
            w[self.perm[k]] = x[k];
        }
    }
}
