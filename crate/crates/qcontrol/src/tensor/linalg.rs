//! Hermitian eigendecomposition, QR orthonormalization and singular values.
//!
//! These are thin adapters over nalgebra's dense complex routines, exposed
//! through [`ComplexMatrix`] so the rest of the crate never touches the
//! backing library directly.

use super::tol::HERMITIAN_TOL;
use super::{c64, ComplexMatrix, C64};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Result of [`eig_hermitian`]: eigenvalues ascending, eigenvectors as the
/// matching columns of a unitary matrix.
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Column `k` of the eigenvector matrix as a column vector.
    pub fn eigenvector(&self, k: usize) -> ComplexMatrix {
        self.eigenvectors.block(0, k, self.eigenvectors.rows(), 1)
    }
}

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c))
}

fn from_nalgebra(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Rejects non-square input and input whose Hermitian defect ‖M − M†‖
/// exceeds [`HERMITIAN_TOL`] relative to max(1, ‖M‖); the accepted matrix is
/// symmetrized before decomposition so roundoff asymmetry cannot leak into
/// the spectrum. Eigenvalues are returned in ascending order.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    eig_hermitian_with_tol(m, HERMITIAN_TOL)
}

/// [`eig_hermitian`] with an explicit Hermitian-defect tolerance.
pub fn eig_hermitian_with_tol(m: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let defect = m.sub(&m.adjoint()).frobenius_norm();
    let scale = m.frobenius_norm().max(1.0);
    if defect > tol * scale {
        return Err(Error::NotHermitian { defect, tol: tol * scale });
    }
    let sym = m.add(&m.adjoint()).scale(c64(0.5, 0.0));
    let eig = to_nalgebra(&sym).symmetric_eigen();

    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors =
        ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { eigenvalues, eigenvectors })
}

/// Orthonormalizes the columns of a tall (rows ≥ cols) full-column-rank
/// matrix: returns Q with Q†Q = I and the same column span as the input.
///
/// The columns are phase-fixed by the sign of the R diagonal, so feeding a
/// complex-Gaussian matrix through this function produces a Haar-distributed
/// isometry. Returns an error for wide or rank-deficient input.
pub fn qr_isometry(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.rows() < m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "qr_isometry needs rows >= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let qr = to_nalgebra(m).qr();
    let q = qr.q();
    let r = qr.r();
    let mut min_diag = f64::INFINITY;
    let mut max_diag = 0.0f64;
    for j in 0..m.cols() {
        let d = r[(j, j)].norm();
        min_diag = min_diag.min(d);
        max_diag = max_diag.max(d);
    }
    if min_diag <= 1e-12 * max_diag.max(1.0) {
        return Err(Error::RankDeficient(min_diag));
    }
    let mut out = from_nalgebra(&q);
    for j in 0..m.cols() {
        let phase = r[(j, j)] / r[(j, j)].norm();
        for i in 0..m.rows() {
            let v = out.get(i, j) * phase;
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Singular values in descending order.
///
/// Computed by a proper bidiagonalization-based SVD rather than through the
/// eigenvalues of M†M: the Gram route flattens small singular values into a
/// noise floor of about ‖M‖·√ε, while the SVD resolves them down to ~‖M‖·ε —
/// the difference matters when testing that a trailing singular value
/// vanishes to 1e-9 relative accuracy.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    to_nalgebra(m).svd(false, false).singular_values.iter().copied().collect()
}

/// Numerical rank of an operator: the number of singular values above
/// `rel_tol` times the largest one.
pub fn operator_rank(m: &ComplexMatrix, rel_tol: f64) -> usize {
    let svs = singular_values(m);
    match svs.first() {
        None | Some(0.0) => 0,
        Some(&max) => svs.iter().filter(|&&s| s > rel_tol * max).count(),
    }
}
