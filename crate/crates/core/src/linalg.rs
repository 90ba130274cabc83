//! Small dense helpers shared by the Gaussian and filtering code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Cholesky::new(symmetrize(m))
}

/// log det of a PD matrix from its Cholesky factor.
pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Mahalanobis form `xᵀ Σ⁻¹ x`.
pub(crate) fn quad_form(chol: &Cholesky<f64, Dyn>, x: &DVector<f64>) -> f64 {
    let y = chol.l().solve_lower_triangular(x).expect("triangular solve");
    y.norm_squared()
}

pub(crate) fn gaussian_log_pdf(chol: &Cholesky<f64, Dyn>, residual: &DVector<f64>) -> f64 {
    let d = residual.len() as f64;
    -0.5 * (quad_form(chol, residual) + log_det(chol) + d * (2.0 * std::f64::consts::PI).ln())
}

pub(crate) fn block_diagonal(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(b);
        at += k;
    }
    out
}
