use nalgebra::{DMatrix, DVector};

use super::chain::renormalize_rows;
use super::DiscreteChain;
use crate::error::{Error, Result};
use crate::samplers::{log_q, ProposalSpec};
use crate::targets::TargetDensity;

const MAX_GRID: usize = 20;
/// Allowed gap between the solved stationary vector and the normalised
/// target restricted to the grid.
const DENSITY_CHECK_TOL: f64 = 1e-8;

/// Restricts a one-dimensional kernel to `grid`: proposals are renormalised
/// over the grid points, the acceptance uses the renormalised proposal, the
/// leftover mass stays on the diagonal and the lazy wrapper of `spec` is
/// applied last.
pub fn discretize_mala(target: &dyn TargetDensity, grid: &[f64], spec: &ProposalSpec) -> Result<DiscreteChain> {
    if target.dim() != 1 || spec.dim() != 1 {
        return Err(Error::InvalidInput("discretisation needs a one-dimensional target".into()));
    }
    let m = grid.len();
    if !(2..=MAX_GRID).contains(&m) {
        return Err(Error::InvalidInput(format!("grid must have between 2 and {MAX_GRID} points")));
    }
    let points: Vec<DVector<f64>> = grid.iter().map(|&x| DVector::from_element(1, x)).collect();
    let u: Vec<f64> = points.iter().map(|p| target.potential(p)).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target is not finite on the grid".into()));
    }

    // log Q̄(i, j), rows normalised with log-sum-exp
    let mut log_qbar = DMatrix::from_fn(m, m, |i, j| log_q(spec, target, &points[i], &points[j]));
    for i in 0..m {
        let row_max = log_qbar.row(i).max();
        let lse = row_max + log_qbar.row(i).iter().map(|v| (v - row_max).exp()).sum::<f64>().ln();
        log_qbar.row_mut(i).add_scalar_mut(-lse);
    }

    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let log_ratio = u[i] - u[j] + log_qbar[(j, i)] - log_qbar[(i, j)];
                t[(i, j)] = (log_qbar[(i, j)] + log_ratio.min(0.0)).exp();
            }
        }
    }
    let base = DiscreteChain::from_transition(renormalize_rows(t))?;
    let chain = if spec.lazy() > 0.0 { base.lazy(spec.lazy())? } else { base };

    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = u.iter().map(|v| (u_min - v).exp()).collect();
    let z: f64 = w.iter().sum();
    let gap = w.iter().zip(chain.stationary().iter()).map(|(a, p)| (a / z - p).abs()).fold(0.0, f64::max);
    if gap > DENSITY_CHECK_TOL {
        return Err(Error::NoConvergence(format!("stationary vector departs from the target by {gap:e}")));
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::GaussianTarget;

    #[test]
    fn rows_stochastic_and_reversible() {
        let t = GaussianTarget::standard(1);
        let grid: Vec<f64> = (0..15).map(|i| -3.0 + 6.0 * i as f64 / 14.0).collect();
        let spec = ProposalSpec::mala(0.5, 1).unwrap().with_lazy(0.25).unwrap();
        let c = discretize_mala(&t, &grid, &spec).unwrap();
        for row in c.transition().row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert!(c.reversibility_residual() < 1e-10);
        assert!(c.laziness() >= 0.25);
    }

    #[test]
    fn two_point_grid() {
        let t = GaussianTarget::standard(1);
        let spec = ProposalSpec::mrw(1.0, 1).unwrap();
        let c = discretize_mala(&t, &[-0.5, 0.5], &spec).unwrap();
        // symmetric target and symmetric proposal: Q̄ = ½ off the diagonal, A = 1
        let q_off = (-0.25f64).exp() / (1.0 + (-0.25f64).exp());
        assert!((c.transition()[(0, 1)] - q_off).abs() < 1e-15);
        assert!((c.transition()[(1, 0)] - q_off).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let t = GaussianTarget::standard(1);
        let spec = ProposalSpec::mala(0.5, 1).unwrap();
        assert!(discretize_mala(&t, &[0.0], &spec).is_err());
        let grid: Vec<f64> = (0..21).map(f64::from).collect();
        assert!(discretize_mala(&t, &grid, &spec).is_err());
    }
}
