//! Dense decompositions, delegated to nalgebra in double precision.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

pub(crate) fn to_dmatrix<S: Scalar>(rows: usize, cols: usize, column_major: &[S]) -> DMatrix<f64> {
    DMatrix::from_iterator(rows, cols, column_major.iter().map(|v| v.as_f64()))
}

/// Largest singular value of a column-major `rows x cols` matrix.
pub(crate) fn largest_singular_value<S: Scalar>(rows: usize, cols: usize, column_major: &[S]) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let m = to_dmatrix(rows, cols, column_major);
    // The spectral norm via the smaller Gram matrix is cheaper than a full SVD.
    let gram = if rows >= cols {
        m.transpose() * &m
    } else {
        &m * m.transpose()
    };
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b)).max(0.0).sqrt()
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub(crate) fn symmetric_extremes(m: DMatrix<f64>) -> (f64, f64) {
    let eig = nalgebra::SymmetricEigen::new(m);
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Largest `λ` with `A x = λ B x` for symmetric `A` and positive definite `B`.
pub(crate) fn generalized_max_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let chol = b.clone().cholesky()?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse()?;
    let c = &l_inv * a * l_inv.transpose();
    let sym = (&c + c.transpose()) * 0.5;
    Some(symmetric_extremes(sym).1)
}

pub(crate) fn invert(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let lu = m.lu();
    if lu.determinant().abs() < f64::EPSILON * n as f64 {
        return None;
    }
    lu.try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_value_of_diagonal() {
        let data = [3.0f64, 0.0, 0.0, -4.0];
        assert!((largest_singular_value(2, 2, &data) - 4.0).abs() < 1e-12);
        assert_eq!(largest_singular_value::<f64>(0, 3, &[]), 0.0);
    }

    #[test]
    fn generalized_eigen_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::identity(2, 2);
        assert!((generalized_max_eigenvalue(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    }
}
