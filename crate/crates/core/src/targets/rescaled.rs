use nalgebra::{DMatrix, DVector};

use super::{GibbsPosterior, GibbsSpec, Support, TargetDensity};
use crate::error::{Error, Result};

/// `V_n(ξ) = U(θ̂ + ξ/√n) - U(θ̂)`, the Gibbs potential seen in local
/// coordinates around the centring point `θ̂`. `V_n(0) = 0` exactly.
#[derive(Debug, Clone)]
pub struct RescaledPotential {
    posterior: GibbsPosterior,
    center: DVector<f64>,
    sqrt_n: f64,
    center_potential: f64,
}

pub fn rescaled_potential(spec: GibbsSpec, center: DVector<f64>) -> Result<RescaledPotential> {
    let posterior = super::gibbs_potential(spec)?;
    RescaledPotential::new(posterior, center)
}

impl RescaledPotential {
    pub fn new(posterior: GibbsPosterior, center: DVector<f64>) -> Result<Self> {
        if center.len() != posterior.dim() {
            return Err(Error::InvalidInput("centre has the wrong dimension".into()));
        }
        let center_potential = posterior.potential(&center);
        if !center_potential.is_finite() {
            return Err(Error::InvalidInput("centre lies outside the prior support".into()));
        }
        let sqrt_n = (posterior.spec().dataset.n() as f64).sqrt();
        Ok(Self { posterior, center, sqrt_n, center_potential })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn sqrt_n(&self) -> f64 {
        self.sqrt_n
    }

    pub fn posterior(&self) -> &GibbsPosterior {
        &self.posterior
    }

    /// `θ = θ̂ + ξ/√n`.
    pub fn to_theta(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.center + xi / self.sqrt_n
    }

    /// `ξ = √n (θ - θ̂)`.
    pub fn to_xi(&self, theta: &DVector<f64>) -> DVector<f64> {
        (theta - &self.center) * self.sqrt_n
    }
}

impl TargetDensity for RescaledPotential {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn potential(&self, xi: &DVector<f64>) -> f64 {
        self.posterior.potential(&self.to_theta(xi)) - self.center_potential
    }

    fn subgrad(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.posterior.subgrad(&self.to_theta(xi)) / self.sqrt_n
    }

    fn potential_and_subgrad(&self, xi: &DVector<f64>) -> (f64, DVector<f64>) {
        let (u, g) = self.posterior.potential_and_subgrad(&self.to_theta(xi));
        (u - self.center_potential, g / self.sqrt_n)
    }

    fn support(&self) -> Support {
        match self.posterior.support() {
            Support::Unbounded => Support::Unbounded,
            Support::Box { lo, hi } => {
                Support::Box { lo: (lo - &self.center) * self.sqrt_n, hi: (hi - &self.center) * self.sqrt_n }
            }
        }
    }
}

/// The target `ξ ↦ inner(M ξ)` pulled back through a linear map `M`;
/// its subgradient is `M^T ∇̃inner(M ξ)`.
#[derive(Debug, Clone)]
pub struct LinearPullback<T> {
    inner: T,
    map: DMatrix<f64>,
}

impl<T: TargetDensity> LinearPullback<T> {
    pub fn new(inner: T, map: DMatrix<f64>) -> Result<Self> {
        let d = inner.dim();
        if map.shape() != (d, d) {
            return Err(Error::InvalidInput(format!("map must be {d}x{d}")));
        }
        Ok(Self { inner, map })
    }
}

impl<T: TargetDensity> TargetDensity for LinearPullback<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn potential(&self, xi: &DVector<f64>) -> f64 {
        self.inner.potential(&(&self.map * xi))
    }

    fn subgrad(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.map.tr_mul(&self.inner.subgrad(&(&self.map * xi)))
    }

    fn potential_and_subgrad(&self, xi: &DVector<f64>) -> (f64, DVector<f64>) {
        let (u, g) = self.inner.potential_and_subgrad(&(&self.map * xi));
        (u, self.map.tr_mul(&g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{CheckLoss, Dataset, Prior, SquaredLoss};
    use nalgebra::dvector;
    use std::sync::Arc;

    #[test]
    fn zero_at_origin() {
        let ds = Arc::new(Dataset::from_rows(3, 1, vec![1.0; 3], vec![1.0, 2.0, 4.0]).unwrap());
        let spec =
            GibbsSpec::new(ds, Arc::new(CheckLoss::new(0.3).unwrap()), 1.0, Prior::symmetric_box(1, 50.0).unwrap())
                .unwrap();
        for c in [0.0, 1.7, -3.3] {
            let v = rescaled_potential(spec.clone(), dvector![c]).unwrap();
            assert_eq!(v.potential(&dvector![0.0]), 0.0);
        }
    }

    #[test]
    fn intercept_check_loss_example() {
        let ds = Arc::new(Dataset::from_rows(1, 1, vec![1.0], vec![0.0]).unwrap());
        let spec =
            GibbsSpec::new(ds, Arc::new(CheckLoss::new(0.5).unwrap()), 1.0, Prior::symmetric_box(1, 10.0).unwrap())
                .unwrap();
        let v = rescaled_potential(spec, dvector![0.0]).unwrap();
        for xi in [-2.0, -0.1, 0.6, 3.0] {
            assert_eq!(v.potential(&dvector![xi]), 0.5 * f64::abs(xi));
        }
    }

    #[test]
    fn squared_loss_is_exact_quadratic() {
        // U(θ) = Σ (y_i - θ)^2 / 2 with n = 4, θ̂ = mean(y): V_n(ξ) = ξ^2 / 2 · (n / n)
        let ds = Arc::new(Dataset::from_rows(4, 1, vec![1.0; 4], vec![1.0, 2.0, 3.0, 6.0]).unwrap());
        let spec = GibbsSpec::new(ds, Arc::new(SquaredLoss), 1.0, Prior::symmetric_box(1, 100.0).unwrap()).unwrap();
        let v = rescaled_potential(spec, dvector![3.0]).unwrap();
        for xi in [-1.5, 0.5, 2.0] {
            assert!((v.potential(&dvector![xi]) - 0.5 * xi * xi).abs() < 1e-12);
            assert!((v.subgrad(&dvector![xi])[0] - xi).abs() < 1e-12);
        }
    }

    #[test]
    fn centre_outside_support_rejected() {
        let ds = Arc::new(Dataset::from_rows(1, 1, vec![1.0], vec![0.0]).unwrap());
        let spec = GibbsSpec::new(ds, Arc::new(SquaredLoss), 1.0, Prior::symmetric_box(1, 1.0).unwrap()).unwrap();
        assert!(rescaled_potential(spec, dvector![2.0]).is_err());
    }
}
