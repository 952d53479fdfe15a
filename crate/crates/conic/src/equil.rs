//! Ruiz equilibration of the canonical data.
//!
//! Row scales are kept uniform within each SOC/PSD block so cone membership
//! is preserved (`s in K  <=>  d*s in K` for a single positive d per block).

use crate::canon::ConeLayout;
use crate::sparse::Csr;

pub struct Scaling {
    /// Row scales (length m).
    pub d: Vec<f64>,
    /// Column scales (length n).
    pub e: Vec<f64>,
}

/// Block id per row: rows in the same SOC/PSD block share a scale.
fn row_groups(layout: &ConeLayout, m: usize) -> Vec<usize> {
    let mut group = vec![0usize; m];
    let mut g = 0usize;
    let mut off = 0usize;
    for _ in 0..layout.n_zero + layout.n_nonneg {
        group[off] = g;
        g += 1;
        off += 1;
    }
    for &d in &layout.socs {
        for _ in 0..d {
            group[off] = g;
            off += 1;
        }
        g += 1;
    }
    for &d in &layout.psds {
        for _ in 0..d * (d + 1) / 2 {
            group[off] = g;
            off += 1;
        }
        g += 1;
    }
    group
}

pub fn equilibrate_a(a: &mut Csr, layout: &ConeLayout) -> Scaling {
    let m = a.m;
    let n = a.n;
    let groups = row_groups(layout, m);
    let n_groups = groups.last().map_or(0, |g| g + 1);
    let mut d = vec![1.0f64; m];
    let mut e = vec![1.0f64; n];

    for _ in 0..10 {
        let mut row_max = vec![0.0f64; m];
        let mut col_max = vec![0.0f64; n];
        for i in 0..m {
            let (idx, val) = a.row(i);
            for (j, v) in idx.iter().zip(val) {
                let av = v.abs();
                if av > row_max[i] {
                    row_max[i] = av;
                }
                let j = *j as usize;
                if av > col_max[j] {
                    col_max[j] = av;
                }
            }
        }
        // Uniform scale within each cone block: use the block max.
        let mut group_max = vec![0.0f64; n_groups];
        for i in 0..m {
            let g = groups[i];
            if row_max[i] > group_max[g] {
                group_max[g] = row_max[i];
            }
        }
        let mut moved = 0.0f64;
        for i in 0..m {
            let gm = group_max[groups[i]];
            if gm > 0.0 {
                let s = 1.0 / gm.sqrt();
                moved = moved.max((gm - 1.0).abs());
                d[i] *= s;
            }
        }
        let mut col_scale = vec![1.0f64; n];
        for j in 0..n {
            if col_max[j] > 0.0 {
                col_scale[j] = 1.0 / col_max[j].sqrt();
                e[j] *= col_scale[j];
            }
        }
        for i in 0..m {
            let gm = group_max[groups[i]];
            let rs = if gm > 0.0 { 1.0 / gm.sqrt() } else { 1.0 };
            let lo = a.indptr[i];
            let hi = a.indptr[i + 1];
            for p in lo..hi {
                a.data[p] *= rs * col_scale[a.indices[p] as usize];
            }
        }
        if moved < 1e-6 {
            break;
        }
    }

    Scaling { d, e }
}
