use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::proposal::draw_normals;
use super::rng::chain_rng;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen_range, SpdMatrix};
use crate::targets::{grid_points_in_ellipsoid, TargetDensity};

const MAX_REJECTIONS: usize = 1_000_000;
const MIN_REGION_MASS: f64 = 1e-6;

/// Truncated Gaussian `N(θ̂, n^{-1} Ĩ)` restricted to `‖z‖ ≤ R`, where
/// `θ = θ̂ + n^{-1/2} Ĩ^{1/2} z`.
#[derive(Debug, Clone)]
pub struct WarmStartSpec {
    pub center: DVector<f64>,
    pub scale_n: f64,
    pub precond: SpdMatrix,
    /// `f64::INFINITY` disables truncation.
    pub radius: f64,
}

impl WarmStartSpec {
    fn validate(&self) -> Result<()> {
        if self.center.len() != self.precond.dim() {
            return Err(Error::InvalidInput("warm-start centre and preconditioner differ in dimension".into()));
        }
        if !(self.scale_n > 0.0 && self.scale_n.is_finite()) {
            return Err(Error::InvalidInput(format!("covariance scale {} must be positive", self.scale_n)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidInput(format!("truncation radius {} must be positive", self.radius)));
        }
        Ok(())
    }

    /// `P(‖z‖ ≤ R)` for `z ~ N(0, I_d)`.
    pub fn region_mass(&self) -> f64 {
        if self.radius.is_infinite() {
            return 1.0;
        }
        let chi2 = ChiSquared::new(self.center.len() as f64).expect("positive degrees of freedom");
        chi2.cdf(self.radius * self.radius)
    }
}

/// Draws `θ₀` from the truncated warm start by rejection.
pub fn warm_start_sample<R: Rng + ?Sized>(ws: &WarmStartSpec, rng: &mut R) -> Result<DVector<f64>> {
    ws.validate()?;
    let mass = ws.region_mass();
    if mass < MIN_REGION_MASS {
        return Err(Error::InvalidInput(format!("truncation region has probability {mass:e}")));
    }
    let d = ws.center.len();
    let scale = ws.scale_n.sqrt().recip();
    for _ in 0..MAX_REJECTIONS {
        let z = draw_normals(rng, d);
        if z.norm() <= ws.radius {
            return Ok(&ws.center + ws.precond.sqrt() * z * scale);
        }
    }
    Err(Error::NoConvergence(format!("no draw within radius {} after {MAX_REJECTIONS} tries", ws.radius)))
}

#[derive(Debug, Clone, Copy)]
pub struct WarmBoundOptions {
    /// `K = {ξ : ‖Ĩ^{-1/2}ξ‖ ≤ radius}`.
    pub radius: f64,
    pub mc_samples: usize,
    pub seed: u64,
    /// Grid resolution for `sup_K |V_n - ξ'Jξ/2|`.
    pub grid_step: f64,
}

/// Upper bound on `log M₀` for the truncated warm start, term by term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmBound {
    /// `-log π_loc(K)`, by self-normalised importance sampling from `N(0, J^{-1})`.
    pub neg_log_mass: f64,
    /// `sup_K |ξ'(Ĩ^{-1} - J)ξ|`, exact.
    pub quadratic_sup: f64,
    /// `2 sup_K |V_n(ξ) - ξ'Jξ/2|` over the grid.
    pub potential_sup: f64,
    /// Effective sample size of the importance weights.
    pub weight_ess: f64,
}

impl WarmBound {
    pub fn total(&self) -> f64 {
        self.neg_log_mass + self.quadratic_sup + self.potential_sup
    }
}

pub fn warm_bound(
    potential: &dyn TargetDensity,
    precision: &DMatrix<f64>,
    precond: &SpdMatrix,
    opts: WarmBoundOptions,
) -> Result<WarmBound> {
    let d = potential.dim();
    if precision.shape() != (d, d) || precond.dim() != d {
        return Err(Error::InvalidInput("matrix dimensions do not match the potential".into()));
    }
    if !(opts.radius > 0.0 && opts.radius.is_finite()) {
        return Err(Error::InvalidInput(format!("radius {} must be positive and finite", opts.radius)));
    }
    if opts.mc_samples == 0 {
        return Err(Error::InvalidInput("need at least one Monte Carlo sample".into()));
    }
    let j = SpdMatrix::new(precision.clone())?;

    // sup over the ellipsoid of |ξ'Mξ| is R² times the spectral radius of Ĩ^{1/2} M Ĩ^{1/2}
    let m = precond.inverse() - precision;
    let whitened = precond.sqrt() * m * precond.sqrt();
    let (lo, hi) = symmetric_eigen_range(&whitened);
    let quadratic_sup = opts.radius * opts.radius * lo.abs().max(hi.abs());

    let mut potential_sup: f64 = 0.0;
    for xi in grid_points_in_ellipsoid(precond, opts.radius, opts.grid_step)? {
        let v = potential.potential(&xi);
        potential_sup = potential_sup.max((v - 0.5 * j.quad_form(&xi)).abs());
    }
    potential_sup *= 2.0;

    // importance sampling: proposal N(0, J^{-1}), target ∝ exp(-V)
    let mut rng = chain_rng(opts.seed, 0);
    let cov_sqrt = SpdMatrix::new(j.inverse().clone())?.sqrt().clone();
    let mut log_w = Vec::with_capacity(opts.mc_samples);
    let mut inside = Vec::with_capacity(opts.mc_samples);
    for _ in 0..opts.mc_samples {
        let xi = &cov_sqrt * draw_normals(&mut rng, d);
        let lw = -potential.potential(&xi) + 0.5 * j.quad_form(&xi);
        log_w.push(lw);
        inside.push((precond.inv_sqrt() * &xi).norm() <= opts.radius);
    }
    let max_lw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return Err(Error::UnreliableEstimate("all importance weights vanish".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|lw| (lw - max_lw).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    let weight_ess = sum * sum / sum_sq;
    if weight_ess < 10.0 {
        return Err(Error::UnreliableEstimate(format!("importance-weight ESS {weight_ess:.2} below 10")));
    }
    let mass: f64 = w.iter().zip(&inside).filter(|(_, k)| **k).map(|(v, _)| v).sum::<f64>() / sum;
    if mass <= 0.0 {
        return Err(Error::UnreliableEstimate("no importance draws fell inside K".into()));
    }
    Ok(WarmBound { neg_log_mass: -mass.ln(), quadratic_sup, potential_sup, weight_ess })
}
