use crate::error::{Error, Result};

/// Inputs of the dimension-dependent MALA step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeInputs {
    pub dim: usize,
    /// Upper eigenvalue bound `ρ₂` of `Ĩ^{1/2} J Ĩ^{1/2}`.
    pub rho2: f64,
    /// Condition number `κ = ρ₂/ρ₁`.
    pub kappa: f64,
    /// Warming parameter `M₀`.
    pub warmness: f64,
    /// Target accuracy `ε`.
    pub tolerance: f64,
    pub c0: f64,
    /// `‖Ĩ‖_op`.
    pub precond_op_norm: f64,
    /// Radius `R` of the high-probability ellipsoid.
    pub radius: f64,
    /// Subgradient linearisation error `ε̃₁`.
    pub grad_error: f64,
}

impl StepSizeInputs {
    /// `ρ₂ = κ = 1`, `Ĩ = I`, `ε̃₁ = 0`.
    pub fn isotropic(dim: usize, warmness: f64, tolerance: f64, c0: f64) -> Self {
        Self { dim, rho2: 1.0, kappa: 1.0, warmness, tolerance, c0, precond_op_norm: 1.0, radius: 0.0, grad_error: 0.0 }
    }
}

/// Rescaled step size
///
/// `h = c₀ / (ρ₂ (d^{1/3} + d^{1/4} L^{1/4} + L^{1/2} + ‖Ĩ‖_op R² ε̃₁²))`,
/// `L = log(M₀ d κ / ε)` clamped at zero. The physical step for a posterior
/// built from `n` observations is `h / n`.
pub fn mala_step_size(p: &StepSizeInputs) -> Result<f64> {
    let positive = [
        ("rho2", p.rho2),
        ("kappa", p.kappa),
        ("warmness", p.warmness),
        ("tolerance", p.tolerance),
        ("c0", p.c0),
        ("precond_op_norm", p.precond_op_norm),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} = {v} must be positive")));
        }
    }
    if p.dim == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    for (name, v) in [("radius", p.radius), ("grad_error", p.grad_error)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} = {v} must be non-negative")));
        }
    }
    let d = p.dim as f64;
    let log_term = (p.warmness * d * p.kappa / p.tolerance).ln().max(0.0);
    let bracket = d.cbrt()
        + d.powf(0.25) * log_term.powf(0.25)
        + log_term.sqrt()
        + p.precond_op_norm * p.radius * p.radius * p.grad_error * p.grad_error;
    Ok(p.c0 / (p.rho2 * bracket))
}
