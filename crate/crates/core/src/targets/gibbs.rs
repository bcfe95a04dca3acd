use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Dataset, Loss, Support, TargetDensity};
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

#[derive(Debug, Clone)]
pub enum Prior {
    /// Uniform on `[lo_i, hi_i]`; contributes nothing inside the box.
    UniformBox {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    Gaussian {
        mean: DVector<f64>,
        precision: SpdMatrix,
    },
}

impl Prior {
    pub fn uniform_box(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidInput("box bounds have different lengths".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidInput("box prior has empty support".into()));
        }
        Ok(Prior::UniformBox { lo, hi })
    }

    /// `[-half_width, half_width]^d`.
    pub fn symmetric_box(d: usize, half_width: f64) -> Result<Self> {
        Self::uniform_box(DVector::from_element(d, -half_width), DVector::from_element(d, half_width))
    }

    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() {
            return Err(Error::InvalidInput("prior covariance does not match mean".into()));
        }
        let cov = SpdMatrix::new(covariance)?;
        let precision = SpdMatrix::new(cov.inverse().clone())?;
        Ok(Prior::Gaussian { mean, precision })
    }

    fn dim(&self) -> usize {
        match self {
            Prior::UniformBox { lo, .. } => lo.len(),
            Prior::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Prior::UniformBox { lo, hi } => Support::Box { lo: lo.clone(), hi: hi.clone() },
            Prior::Gaussian { .. } => Support::Unbounded,
        }
    }

    /// `-log π(θ)` up to an additive constant.
    pub fn neg_log_density(&self, theta: &DVector<f64>) -> f64 {
        match self {
            Prior::UniformBox { .. } => {
                if self.support().contains(theta) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Prior::Gaussian { mean, precision } => 0.5 * precision.quad_form(&(theta - mean)),
        }
    }

    /// Adds `-∇ log π(θ)` to `out`.
    fn add_neg_log_grad(&self, theta: &DVector<f64>, out: &mut DVector<f64>) {
        if let Prior::Gaussian { mean, precision } = self {
            *out += precision.matrix() * (theta - mean);
        }
    }
}

/// Ingredients of a Gibbs posterior `∝ exp{-α n R_n(θ)} π(θ)`.
#[derive(Debug, Clone)]
pub struct GibbsSpec {
    pub dataset: Arc<Dataset>,
    pub loss: Arc<dyn Loss>,
    pub learning_rate: f64,
    pub prior: Prior,
}

impl GibbsSpec {
    pub fn new(dataset: Arc<Dataset>, loss: Arc<dyn Loss>, learning_rate: f64, prior: Prior) -> Result<Self> {
        let spec = Self { dataset, loss, learning_rate, prior };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.prior.dim() != self.dataset.dim() {
            return Err(Error::InvalidInput(format!(
                "prior dimension {} does not match covariate dimension {}",
                self.prior.dim(),
                self.dataset.dim()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    /// Empirical risk `R_n(θ) = n^{-1} Σ ℓ(X_i, θ)`.
    pub fn empirical_risk(&self, theta: &DVector<f64>) -> f64 {
        let total: f64 = self.dataset.rows().map(|(x, y)| self.loss.value(x, y, theta)).sum();
        total / self.dataset.n() as f64
    }

    /// `(R_n(θ), n^{-1} Σ g(X_i, θ))`.
    pub fn empirical_risk_and_subgrad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let n = self.dataset.n() as f64;
        let mut g = DVector::zeros(self.dim());
        let total = self.loss.accumulate(&self.dataset, theta, 1.0, &mut g);
        (total / n, g / n)
    }
}

/// The potential `U(θ) = α Σ ℓ(X_i, θ) - log π(θ)` of a Gibbs posterior.
#[derive(Debug, Clone)]
pub struct GibbsPosterior {
    spec: GibbsSpec,
    support: Support,
}

pub fn gibbs_potential(spec: GibbsSpec) -> Result<GibbsPosterior> {
    spec.validate()?;
    let support = spec.prior.support();
    Ok(GibbsPosterior { spec, support })
}

impl GibbsPosterior {
    pub fn spec(&self) -> &GibbsSpec {
        &self.spec
    }
}

impl TargetDensity for GibbsPosterior {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn potential(&self, theta: &DVector<f64>) -> f64 {
        if !self.support.contains(theta) {
            return f64::INFINITY;
        }
        let loss: f64 = self.spec.dataset.rows().map(|(x, y)| self.spec.loss.value(x, y, theta)).sum();
        self.spec.learning_rate * loss + self.spec.prior.neg_log_density(theta)
    }

    fn subgrad(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.potential_and_subgrad(theta).1
    }

    fn potential_and_subgrad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut g = DVector::zeros(self.dim());
        if !self.support.contains(theta) {
            return (f64::INFINITY, g);
        }
        let alpha = self.spec.learning_rate;
        let loss = self.spec.loss.accumulate(&self.spec.dataset, theta, alpha, &mut g);
        self.spec.prior.add_neg_log_grad(theta, &mut g);
        (alpha * loss + self.spec.prior.neg_log_density(theta), g)
    }

    fn support(&self) -> Support {
        self.support.clone()
    }
}
