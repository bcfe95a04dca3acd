use nalgebra::{DMatrix, DVector};

use super::Dataset;
use crate::error::{Error, Result};

/// Per-datum loss oracle `ℓ((x, y), θ)` with a subgradient in `θ`.
///
/// Samplers and the risk minimiser only talk to losses through this trait,
/// so user-defined losses plug in without further changes.
pub trait Loss: Send + Sync + std::fmt::Debug {
    fn value(&self, x: &[f64], y: f64, theta: &DVector<f64>) -> f64;

    /// Adds `weight * g((x, y), θ)` to `out`.
    fn add_subgrad(&self, x: &[f64], y: f64, theta: &DVector<f64>, weight: f64, out: &mut DVector<f64>);

    /// Loss value, with `weight * g` accumulated into `out` in the same pass.
    fn value_and_add_subgrad(
        &self,
        x: &[f64],
        y: f64,
        theta: &DVector<f64>,
        weight: f64,
        out: &mut DVector<f64>,
    ) -> f64 {
        self.add_subgrad(x, y, theta, weight, out);
        self.value(x, y, theta)
    }

    /// `Σ_i ℓ((x_i, y_i), θ)` over a dataset, with `weight * Σ_i g_i` added to `out`.
    fn accumulate(&self, data: &Dataset, theta: &DVector<f64>, weight: f64, out: &mut DVector<f64>) -> f64 {
        data.rows().map(|(x, y)| self.value_and_add_subgrad(x, y, theta, weight, out)).sum()
    }

    /// Hessian of `θ ↦ ℓ((x, y), θ)` for twice-differentiable losses.
    fn hessian(&self, _x: &[f64], _y: f64, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

fn linear_predictor(x: &[f64], theta: &DVector<f64>) -> f64 {
    x.iter().zip(theta.as_slice()).map(|(a, b)| a * b).sum()
}

fn check_value(residual: f64, tau: f64) -> f64 {
    // (Y - q)(τ - 1(Y < q))
    let ind = f64::from(u8::from(residual < 0.0));
    residual * (tau - ind)
}

// 1(Y < x'θ) - τ; the indicator is 0 at a tie.
fn check_slope(y: f64, pred: f64, tau: f64) -> f64 {
    f64::from(u8::from(y < pred)) - tau
}

/// Quantile check loss `(Y - x'θ)(τ - 1(Y < x'θ))`.
pub fn check_loss(x: &[f64], y: f64, theta: &DVector<f64>, tau: f64) -> f64 {
    check_value(y - linear_predictor(x, theta), tau)
}

/// Subgradient `(1(Y < x'θ) - τ) x` of the check loss.
pub fn check_loss_subgrad(x: &[f64], y: f64, theta: &DVector<f64>, tau: f64) -> DVector<f64> {
    let s = check_slope(y, linear_predictor(x, theta), tau);
    DVector::from_iterator(x.len(), x.iter().map(|v| s * v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckLoss {
    tau: f64,
}

impl CheckLoss {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("quantile level {tau} outside (0, 1)")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Loss for CheckLoss {
    fn value(&self, x: &[f64], y: f64, theta: &DVector<f64>) -> f64 {
        check_loss(x, y, theta, self.tau)
    }

    fn add_subgrad(&self, x: &[f64], y: f64, theta: &DVector<f64>, weight: f64, out: &mut DVector<f64>) {
        let s = weight * check_slope(y, linear_predictor(x, theta), self.tau);
        for (o, v) in out.iter_mut().zip(x) {
            *o += s * v;
        }
    }

    fn value_and_add_subgrad(
        &self,
        x: &[f64],
        y: f64,
        theta: &DVector<f64>,
        weight: f64,
        out: &mut DVector<f64>,
    ) -> f64 {
        let pred = linear_predictor(x, theta);
        let ind = f64::from(u8::from(y < pred));
        let s = weight * (ind - self.tau);
        for (o, v) in out.as_mut_slice().iter_mut().zip(x) {
            *o += s * v;
        }
        (y - pred) * (self.tau - ind)
    }

    fn accumulate(&self, data: &Dataset, theta: &DVector<f64>, weight: f64, out: &mut DVector<f64>) -> f64 {
        let th = theta.as_slice();
        let g = out.as_mut_slice();
        let mut total = 0.0;
        for (x, y) in data.rows() {
            let pred: f64 = x.iter().zip(th).map(|(a, b)| a * b).sum();
            let ind = f64::from(u8::from(y < pred));
            let s = weight * (ind - self.tau);
            for (o, v) in g.iter_mut().zip(x) {
                *o += s * v;
            }
            total += (y - pred) * (self.tau - ind);
        }
        total
    }
}

/// Half squared error `(Y - x'θ)^2 / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquaredLoss;

impl Loss for SquaredLoss {
    fn value(&self, x: &[f64], y: f64, theta: &DVector<f64>) -> f64 {
        let r = y - linear_predictor(x, theta);
        0.5 * r * r
    }

    fn add_subgrad(&self, x: &[f64], y: f64, theta: &DVector<f64>, weight: f64, out: &mut DVector<f64>) {
        let s = -weight * (y - linear_predictor(x, theta));
        for (o, v) in out.iter_mut().zip(x) {
            *o += s * v;
        }
    }

    fn hessian(&self, x: &[f64], _y: f64, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let v = DVector::from_column_slice(x);
        Some(&v * v.transpose())
    }
}
