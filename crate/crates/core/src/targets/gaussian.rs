use nalgebra::{DMatrix, DVector};

use super::{KnownMoments, TargetDensity};
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

/// `N(μ, J^{-1})` parameterised by its precision `J`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    precision: SpdMatrix,
}

impl GaussianTarget {
    pub fn standard(d: usize) -> Self {
        Self { mean: DVector::zeros(d), precision: SpdMatrix::identity(d) }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &SpdMatrix {
        &self.precision
    }
}

pub fn gaussian_target(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<GaussianTarget> {
    if precision.nrows() != mean.len() {
        return Err(Error::InvalidInput(format!(
            "precision is {}x{} but mean has length {}",
            precision.nrows(),
            precision.ncols(),
            mean.len()
        )));
    }
    let precision = SpdMatrix::new(precision)?;
    Ok(GaussianTarget { mean, precision })
}

impl TargetDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn potential(&self, theta: &DVector<f64>) -> f64 {
        let r = theta - &self.mean;
        0.5 * self.precision.quad_form(&r)
    }

    fn subgrad(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.precision.matrix() * (theta - &self.mean)
    }

    fn potential_and_subgrad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = theta - &self.mean;
        let g = self.precision.matrix() * &r;
        (0.5 * r.dot(&g), g)
    }

    fn known_moments(&self) -> Option<KnownMoments> {
        Some(KnownMoments { mean: self.mean.clone(), covariance: self.precision.inverse().clone() })
    }
}
