//! Small dense helpers shared by the smoothers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest 2-norm condition number accepted for a weighted design matrix.
pub const MAX_CONDITION: f64 = 1e12;

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// 2-norm condition number of a symmetric matrix; infinite when not positive definite.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the symmetric positive definite system `a x = b`, refusing ill-conditioned `a`.
pub fn solve_normal_equations(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let cond = symmetric_condition(&a);
    if !(cond < MAX_CONDITION) {
        return Err(Error::SingularDesign(cond));
    }
    let chol = a.cholesky().ok_or(Error::SingularDesign(cond))?;
    Ok(chol.solve(&b))
}
