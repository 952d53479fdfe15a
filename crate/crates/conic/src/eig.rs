//! Dense symmetric eigendecomposition helpers.

use nalgebra::DMatrix;

use crate::ConicError;

/// Eigendecomposition of a symmetric matrix given in svec/packed or dense form.
pub struct SymEig {
    pub values: Vec<f64>,
    /// Column k is the eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Full symmetric eigendecomposition. The input is symmetrized as
/// `(m + m')/2` before factoring; callers must validate symmetry themselves
/// if they need a hard guarantee.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEig {
    let n = m.nrows();
    let mut s = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let e = s.symmetric_eigen();
    SymEig { values: e.eigenvalues.as_slice().to_vec(), vectors: e.eigenvectors }
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Errors when the asymmetry `max |m_ij - m_ji|` exceeds `1e-9 * (1 + max|m|)`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64, ConicError> {
    if m.nrows() != m.ncols() {
        return Err(ConicError::AsymmetricInput(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Err(ConicError::AsymmetricInput("empty matrix".into()));
    }
    let scale = 1.0 + m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-9 * scale {
        return Err(ConicError::AsymmetricInput(format!(
            "max |m_ij - m_ji| = {asym:.3e} exceeds tolerance"
        )));
    }
    let e = sym_eigen(m);
    Ok(e.values.iter().copied().fold(f64::INFINITY, f64::min))
}
