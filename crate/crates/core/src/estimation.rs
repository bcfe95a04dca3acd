//! Empirical risk minimisation for the centring point `θ̂` and the
//! preconditioners built from the data (inverse Gram, inverse mean Hessian).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::targets::{Dataset, GibbsSpec, Prior};

/// Projected subgradient descent with steps `c/√t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmConfig {
    pub max_iters: usize,
    /// `c` in the step schedule `c/√t`.
    pub step_scale: f64,
    /// Projection box; `None` uses the prior box when there is one.
    pub projection: Option<(DVector<f64>, DVector<f64>)>,
    /// Stop once a window of 1000 iterations improves the best risk by less than this.
    pub tolerance: f64,
    /// Average the second half of the iterates.
    pub averaging: bool,
}

impl Default for ErmConfig {
    fn default() -> Self {
        Self { max_iters: 20_000, step_scale: 1.0, projection: None, tolerance: 1e-12, averaging: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmResult {
    pub theta: DVector<f64>,
    pub risk: f64,
    pub iterations: usize,
    /// Best risk seen after each iteration (index 0 is the initial point).
    pub best_risk: Vec<f64>,
}

const WINDOW: usize = 1000;

fn project(theta: &mut DVector<f64>, bounds: Option<&(DVector<f64>, DVector<f64>)>) {
    if let Some((lo, hi)) = bounds {
        for i in 0..theta.len() {
            theta[i] = theta[i].clamp(lo[i], hi[i]);
        }
    }
}

/// Minimises `R_n` from `init`. Returns the tail-averaged iterate unless the
/// best single iterate has lower risk, so `R_n(θ̂) ≤ R_n(init)` always holds.
/// Non-smooth risks may have several minimisers; which one is returned
/// depends on `init` and the schedule.
pub fn minimize_empirical_risk(spec: &GibbsSpec, init: &DVector<f64>, cfg: &ErmConfig) -> Result<ErmResult> {
    if !(cfg.step_scale > 0.0 && cfg.tolerance > 0.0) {
        return Err(Error::InvalidInput("step scale and tolerance must be positive".into()));
    }
    if init.len() != spec.dim() {
        return Err(Error::InvalidInput("initial point has the wrong dimension".into()));
    }
    let prior_box = match &spec.prior {
        Prior::UniformBox { lo, hi } => Some((lo.clone(), hi.clone())),
        Prior::Gaussian { .. } => None,
    };
    let bounds = cfg.projection.as_ref().or(prior_box.as_ref());
    if let Some((lo, hi)) = bounds {
        if init.iter().zip(lo.iter().zip(hi.iter())).any(|(t, (l, h))| t < l || t > h) {
            return Err(Error::InvalidInput("initial point lies outside the feasible box".into()));
        }
    }

    let mut theta = init.clone();
    let (r0, mut g) = spec.empirical_risk_and_subgrad(&theta);
    if !r0.is_finite() {
        return Err(Error::NonFinite(format!("R_n(init) = {r0}")));
    }
    let mut best = (r0, theta.clone());
    let mut best_risk = vec![r0];
    let tail_start = cfg.max_iters / 2;
    let mut avg = DVector::zeros(theta.len());
    let mut avg_count = 0usize;
    let mut window_start_best = r0;
    let mut iterations = 0;

    for t in 1..=cfg.max_iters {
        iterations = t;
        theta -= &g * (cfg.step_scale / (t as f64).sqrt());
        project(&mut theta, bounds);
        let (r, grad) = spec.empirical_risk_and_subgrad(&theta);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("R_n = {r} at iteration {t}")));
        }
        g = grad;
        if r < best.0 {
            best = (r, theta.clone());
        }
        best_risk.push(best.0);
        if !cfg.averaging || t > tail_start {
            avg += &theta;
            avg_count += 1;
        }
        if t % WINDOW == 0 {
            if window_start_best - best.0 < cfg.tolerance && t >= 2 * WINDOW {
                break;
            }
            window_start_best = best.0;
        }
    }

    let mut result = (best.0, best.1);
    if cfg.averaging && avg_count > 0 {
        let mut mean = avg / avg_count as f64;
        project(&mut mean, bounds);
        let r = spec.empirical_risk(&mean);
        if r <= result.0 {
            result = (r, mean);
        }
    }
    Ok(ErmResult { theta: result.1, risk: result.0, iterations, best_risk })
}

fn invert_spd_checked(m: DMatrix<f64>, what: &str) -> Result<SpdMatrix> {
    let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let (imin, min) =
        eig.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if min < 1e-10 {
        return Err(Error::RankDeficient { direction: eig.eigenvectors.column(imin).iter().copied().collect() });
    }
    let inv = m.clone().try_inverse().ok_or_else(|| Error::NotSpd(format!("{what} is singular")))?;
    SpdMatrix::new((&inv + inv.transpose()) * 0.5)
}

/// `Ĩ = (n^{-1} Σ x_i x_i')^{-1}`.
pub fn empirical_gram_precond(data: &Dataset) -> Result<SpdMatrix> {
    invert_spd_checked(data.gram(), "empirical Gram matrix")
}

/// `Ĩ = (n^{-1} Σ Hess ℓ(X_i, θ̂))^{-1}` for twice-differentiable losses.
pub fn empirical_hessian_precond(spec: &GibbsSpec, theta_hat: &DVector<f64>) -> Result<SpdMatrix> {
    let d = spec.dim();
    let mut h = DMatrix::zeros(d, d);
    for (x, y) in spec.dataset.rows() {
        let hi = spec
            .loss
            .hessian(x, y, theta_hat)
            .ok_or_else(|| Error::InvalidInput("loss does not provide a Hessian".into()))?;
        h += hi;
    }
    h /= spec.dataset.n() as f64;
    match invert_spd_checked(h, "mean Hessian") {
        Err(Error::RankDeficient { direction }) => {
            Err(Error::NotSpd(format!("mean Hessian is singular along {direction:?}")))
        }
        other => other,
    }
}
