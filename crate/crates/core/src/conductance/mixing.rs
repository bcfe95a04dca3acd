use nalgebra::DVector;

use super::{DiscreteChain, SubsetTable};
use crate::error::{Error, Result};

pub const MAX_CHI2_STEPS: u64 = 1_000_000;
/// Chains lazier than this are accepted by [`verify_mixing_bound`].
pub const MIN_LAZINESS: f64 = 0.05;
const MAX_BOUND_STATES: usize = 15;

/// `χ²(μ, π) = Σ μ_i²/π_i − 1`.
pub fn chi2_divergence(mu: &DVector<f64>, pi: &DVector<f64>) -> Result<f64> {
    if pi.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidInput("χ² is undefined when π has a zero entry".into()));
    }
    Ok(mu.iter().zip(pi.iter()).map(|(m, p)| m * m / p).sum::<f64>() - 1.0)
}

fn check_distribution(mu: &DVector<f64>, m: usize) -> Result<()> {
    if mu.len() != m || mu.iter().any(|v| !(*v >= 0.0)) || (mu.sum() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("initial distribution is not a probability vector".into()));
    }
    Ok(())
}

/// First `k` with `χ²(μ₀Tᵏ, π) ≤ ε²`, or `None` if that takes more than
/// [`MAX_CHI2_STEPS`] steps.
pub fn chi2_mixing_time(chain: &DiscreteChain, mu0: &DVector<f64>, eps: f64) -> Result<Option<u64>> {
    check_distribution(mu0, chain.size())?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput("ε must lie in (0, 1)".into()));
    }
    let pi = chain.stationary();
    let tt = chain.transition().transpose();
    let mut mu = mu0.clone();
    for k in 0..=MAX_CHI2_STEPS {
        if chi2_divergence(&mu, pi)? <= eps * eps {
            return Ok(Some(k));
        }
        mu = &tt * mu;
    }
    Ok(None)
}

/// Puts mass `M₀π_i` on states in increasing order of `π_i` until the mass
/// is used up.
pub fn worst_warm_start(pi: &DVector<f64>, m0: f64) -> Result<DVector<f64>> {
    if !(m0 >= 1.0) {
        return Err(Error::InvalidInput("warmness must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| pi[a].total_cmp(&pi[b]).then(a.cmp(&b)));
    let mut mu = DVector::zeros(pi.len());
    let mut left = 1.0;
    for i in order {
        let take = (m0 * pi[i]).min(left);
        mu[i] = take;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    // rounding residue goes to the last state touched
    let total = mu.sum();
    Ok(mu / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingBoundCheck {
    /// `None` if the chain did not mix within [`MAX_CHI2_STEPS`].
    pub tau_actual: Option<u64>,
    /// `f64::INFINITY` when the profile vanishes on the integration range.
    pub tau_bound: f64,
    pub holds: bool,
    pub zeta: f64,
    pub s: f64,
}

impl MixingBoundCheck {
    pub fn bound_is_infinite(&self) -> bool {
        self.tau_bound.is_infinite()
    }
}

/// `∫_a^b dv / (v Φ(v)²)` for a step function given as `(from, value)`;
/// the integrand is zero where the feasible family is empty.
fn step_integral(steps: &[(f64, f64)], a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let mut total = 0.0;
    for (k, &(from, phi)) in steps.iter().enumerate() {
        let to = steps.get(k + 1).map_or(f64::INFINITY, |s| s.0);
        let lo = from.max(a);
        let hi = to.min(b);
        if lo >= hi {
            continue;
        }
        if phi == 0.0 {
            return f64::INFINITY;
        }
        total += (hi / lo).ln() / (phi * phi);
    }
    total
}

/// Checks `τ(ε, μ₀) ≤ (16/ζ)∫_{4/M₀}^{1/2} dv/(vΦ_s(v)²) + (64/ζ)∫_{1/2}^{4√2/ε} dv/(vΦ_s(½)²)`
/// with `s = ε²/(16M₀²)` and `μ₀` the worst `M₀`-warm start.
pub fn verify_mixing_bound(chain: &DiscreteChain, m0: f64, eps: f64) -> Result<MixingBoundCheck> {
    if chain.size() > MAX_BOUND_STATES {
        return Err(Error::UnsupportedDimension { dim: chain.size(), max: MAX_BOUND_STATES });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput("ε must lie in (0, 1)".into()));
    }
    if !chain.is_reversible() {
        return Err(Error::InvalidInput(format!(
            "chain is not reversible (residual {:e})",
            chain.reversibility_residual()
        )));
    }
    let laziness = chain.laziness();
    if laziness < MIN_LAZINESS {
        return Err(Error::InvalidInput(format!("chain laziness {laziness} is below {MIN_LAZINESS}")));
    }
    let zeta = laziness.min(0.5);
    let s = eps * eps / (16.0 * m0 * m0);
    let mu0 = worst_warm_start(chain.stationary(), m0)?;

    let table = SubsetTable::new(chain)?;
    let steps = table.profile_steps(s, 0.5);
    let first = step_integral(&steps, 4.0 / m0, 0.5);
    let second = match steps.last() {
        Some(&(_, 0.0)) => f64::INFINITY,
        Some(&(_, phi_half)) => (8.0 * 2f64.sqrt() / eps).ln() / (phi_half * phi_half),
        None => 0.0,
    };
    let tau_bound = 16.0 / zeta * first + 64.0 / zeta * second;

    let tau_actual = chi2_mixing_time(chain, &mu0, eps)?;
    let holds = tau_bound.is_infinite() || tau_actual.is_some_and(|t| t as f64 <= tau_bound);
    Ok(MixingBoundCheck { tau_actual, tau_bound, holds, zeta, s })
}
