//! Minimal CSR sparse matrix support: construction, matvec, transpose matvec.

#[derive(Debug, Clone)]
pub struct Csr {
    pub m: usize,
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn from_rows(n_cols: usize, rows: &[Vec<(u32, f64)>]) -> Self {
        let m = rows.len();
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut indptr = Vec::with_capacity(m + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            for &(j, v) in row {
                debug_assert!((j as usize) < n_cols);
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Csr { m, n: n_cols, indptr, indices, data }
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    /// `y += alpha * A x`
    pub fn matvec_acc(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.m);
        for i in 0..self.m {
            let (idx, val) = self.row(i);
            let mut acc = 0.0;
            for (j, v) in idx.iter().zip(val) {
                acc += v * x[*j as usize];
            }
            y[i] += alpha * acc;
        }
    }

    /// `y += alpha * A' x`
    pub fn matvec_t_acc(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.m);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.m {
            let xi = alpha * x[i];
            if xi == 0.0 {
                continue;
            }
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                y[*j as usize] += v * xi;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        self.matvec_acc(x, 1.0, &mut y);
        y
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_t_acc(x, 1.0, &mut y);
        y
    }
}
