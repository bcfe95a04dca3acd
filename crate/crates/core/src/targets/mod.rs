//! Target densities `f(θ) = exp(-U(θ))`: Gaussian targets, Gibbs posteriors
//! built from a dataset, a loss and a prior, the rescaled potential centred at
//! the empirical risk minimiser, and a grid scanner for quadratic closeness.

mod condition_a;
mod data;
mod gaussian;
mod gibbs;
mod loss;
mod rescaled;

pub use condition_a::{condition_a_scan, grid_points_in_ellipsoid, ConditionAReport, CONDITION_A_THRESHOLD};
pub use data::Dataset;
pub use gaussian::{gaussian_target, GaussianTarget};
pub use gibbs::{gibbs_potential, GibbsPosterior, GibbsSpec, Prior};
pub use loss::{check_loss, check_loss_subgrad, CheckLoss, Loss, SquaredLoss};
pub use rescaled::{rescaled_potential, LinearPullback, RescaledPotential};

use nalgebra::{DMatrix, DVector};

/// Axis-aligned support of a target.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Unbounded,
    Box { lo: DVector<f64>, hi: DVector<f64> },
}

impl Support {
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        match self {
            Support::Unbounded => theta.iter().all(|v| v.is_finite()),
            Support::Box { lo, hi } => {
                theta.iter().zip(lo.iter().zip(hi.iter())).all(|(t, (l, h))| *l <= *t && *t <= *h)
            }
        }
    }
}

/// Closed-form mean and covariance of a target, when available.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// An unnormalised log-density on `R^d`, given through its potential
/// `U = -log f` and a subgradient oracle.
///
/// Evaluation must be a pure function of `θ` so that targets can be shared
/// read-only between chains running on different threads.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// `U(θ)`; `+∞` outside the support.
    fn potential(&self, theta: &DVector<f64>) -> f64;

    /// A subgradient of `U` at `θ`. Only meaningful inside the support.
    fn subgrad(&self, theta: &DVector<f64>) -> DVector<f64>;

    fn potential_and_subgrad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.potential(theta), self.subgrad(theta))
    }

    fn support(&self) -> Support {
        Support::Unbounded
    }

    fn known_moments(&self) -> Option<KnownMoments> {
        None
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, theta: &DVector<f64>) -> f64 {
        (**self).potential(theta)
    }
    fn subgrad(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).subgrad(theta)
    }
    fn potential_and_subgrad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).potential_and_subgrad(theta)
    }
    fn support(&self) -> Support {
        (**self).support()
    }
    fn known_moments(&self) -> Option<KnownMoments> {
        (**self).known_moments()
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, theta: &DVector<f64>) -> f64 {
        (**self).potential(theta)
    }
    fn subgrad(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).subgrad(theta)
    }
    fn potential_and_subgrad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).potential_and_subgrad(theta)
    }
    fn support(&self) -> Support {
        (**self).support()
    }
    fn known_moments(&self) -> Option<KnownMoments> {
        (**self).known_moments()
    }
}
