//! Type-II Anderson acceleration with retroactive safeguarding.
//!
//! The plain relaxed Douglas-Rachford step is an averaged operator, so its
//! fixed-point residual never increases; a residual increase after an
//! accelerated step is therefore attributable to the acceleration, which is
//! then rejected and the history cleared.

use nalgebra::{DMatrix, DVector};

pub struct Anderson {
    mem: usize,
    dim: usize,
    /// Ring of successive differences of map outputs and residuals.
    dg: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    /// Cached Gram matrix of `df` columns (grows/rolls with the ring).
    gram: DMatrix<f64>,
    g_prev: Option<Vec<f64>>,
    f_prev: Option<Vec<f64>>,
}

impl Anderson {
    pub fn new(mem: usize, dim: usize) -> Self {
        Self {
            mem,
            dim,
            dg: Vec::new(),
            df: Vec::new(),
            gram: DMatrix::zeros(0, 0),
            g_prev: None,
            f_prev: None,
        }
    }

    pub fn clear(&mut self) {
        self.dg.clear();
        self.df.clear();
        self.gram = DMatrix::zeros(0, 0);
        self.g_prev = None;
        self.f_prev = None;
    }

    fn push_pair(&mut self, dg: Vec<f64>, df: Vec<f64>) {
        let rolled = self.dg.len() == self.mem;
        if rolled {
            self.dg.remove(0);
            self.df.remove(0);
        }
        self.dg.push(dg);
        self.df.push(df);
        let m = self.df.len();
        let mut gram = DMatrix::zeros(m, m);
        let old = &self.gram;
        let off = if rolled { 1 } else { 0 };
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                gram[(i, j)] = old[(i + off, j + off)];
            }
        }
        for i in 0..m {
            let v: f64 = self.df[i].iter().zip(&self.df[m - 1]).map(|(a, b)| a * b).sum();
            gram[(i, m - 1)] = v;
            gram[(m - 1, i)] = v;
        }
        self.gram = gram;
    }

    /// Records the latest map output `g = T(x)` and residual `f = g - x`,
    /// and returns the accelerated candidate when history is available.
    pub fn push_and_candidate(&mut self, g: &[f64], f: &[f64]) -> Option<Vec<f64>> {
        if self.mem == 0 {
            return None;
        }
        debug_assert_eq!(g.len(), self.dim);
        if let (Some(gp), Some(fp)) = (&self.g_prev, &self.f_prev) {
            let dg: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
            let df: Vec<f64> = f.iter().zip(fp).map(|(a, b)| a - b).collect();
            self.push_pair(dg, df);
        }
        self.g_prev = Some(g.to_vec());
        self.f_prev = Some(f.to_vec());

        let m = self.df.len();
        if m == 0 {
            return None;
        }
        // gamma = argmin || f - DF gamma ||, via regularized normal equations.
        let mut lhs = self.gram.clone();
        let mut frob2 = 0.0f64;
        for i in 0..m {
            frob2 += lhs[(i, i)];
        }
        let reg = 1e-10 * frob2.max(1e-10);
        for i in 0..m {
            lhs[(i, i)] += reg;
        }
        let mut rhs = DVector::zeros(m);
        for i in 0..m {
            rhs[i] = self.df[i].iter().zip(f).map(|(a, b)| a * b).sum();
        }
        let gamma = lhs.lu().solve(&rhs)?;
        if gamma.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut out = g.to_vec();
        for (i, col) in self.dg.iter().enumerate() {
            let gi = gamma[i];
            if gi != 0.0 {
                for (o, c) in out.iter_mut().zip(col) {
                    *o -= gi * c;
                }
            }
        }
        Some(out)
    }
}
