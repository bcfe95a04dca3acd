//! Small dense linear-algebra helpers for symmetric positive definite matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this floor are treated as non-positive.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Maximum tolerated asymmetry `max |A_ij - A_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn symmetry_residual(a: &DMatrix<f64>) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            r = r.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    r
}

fn is_diagonal(a: &DMatrix<f64>) -> bool {
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] == 0.0))
}

/// A validated SPD matrix together with its symmetric square root, inverse
/// square root, inverse and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 || matrix.ncols() != d {
            return Err(Error::NotSpd(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let asym = symmetry_residual(&matrix);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSpd(format!("symmetry residual {asym:e}")));
        }

        // Diagonal matrices bypass the eigensolver so that dyadic scalings stay exact.
        if is_diagonal(&matrix) {
            let diag = matrix.diagonal();
            let min = diag.min();
            if min <= EIGEN_FLOOR {
                return Err(Error::NotSpd(format!("minimum eigenvalue {min:e}")));
            }
            let sqrt = DMatrix::from_diagonal(&diag.map(f64::sqrt));
            let inv_sqrt = DMatrix::from_diagonal(&diag.map(|v| 1.0 / v.sqrt()));
            let inverse = DMatrix::from_diagonal(&diag.map(|v| 1.0 / v));
            return Ok(Self {
                log_det: diag.iter().map(|v| v.ln()).sum(),
                min_eigenvalue: min,
                max_eigenvalue: diag.max(),
                matrix,
                sqrt,
                inv_sqrt,
                inverse,
            });
        }

        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.min();
        if min <= EIGEN_FLOOR {
            return Err(Error::NotSpd(format!("minimum eigenvalue {min:e}")));
        }
        let vecs = &eig.eigenvectors;
        let rebuild = |f: &dyn Fn(f64) -> f64| {
            let scaled = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            let m = vecs * scaled * vecs.transpose();
            (&m + m.transpose()) * 0.5
        };
        Ok(Self {
            sqrt: rebuild(&f64::sqrt),
            inv_sqrt: rebuild(&|v| 1.0 / v.sqrt()),
            inverse: rebuild(&|v| 1.0 / v),
            log_det: eig.eigenvalues.iter().map(|v| v.ln()).sum(),
            min_eigenvalue: min,
            max_eigenvalue: eig.eigenvalues.max(),
            matrix,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }
    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }
    pub fn log_det(&self) -> f64 {
        self.log_det
    }
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        self.max_eigenvalue
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * x))
    }
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn symmetric_eigen_range(a: &DMatrix<f64>) -> (f64, f64) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let spd = SpdMatrix::new(a.clone()).unwrap();
        let back = spd.sqrt() * spd.sqrt();
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() <= 1e-8);
        }
        let id = spd.inv_sqrt() * spd.matrix() * spd.inv_sqrt();
        assert_relative_eq!(id, DMatrix::identity(3, 3), epsilon = 1e-10);
        assert_relative_eq!(spd.log_det(), a.determinant().ln(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::new(indef), Err(Error::NotSpd(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(SpdMatrix::new(asym), Err(Error::NotSpd(_))));
        let singular = DMatrix::from_diagonal_element(2, 2, 0.0);
        assert!(SpdMatrix::new(singular).is_err());
    }

    #[test]
    fn diagonal_dyadic_is_exact() {
        let spd = SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25]))).unwrap();
        assert_eq!(spd.sqrt()[(0, 0)], 2.0);
        assert_eq!(spd.sqrt()[(1, 1)], 0.5);
        assert_eq!(spd.inv_sqrt()[(1, 1)], 2.0);
        assert_eq!(spd.inverse()[(0, 0)], 0.25);
    }
}
