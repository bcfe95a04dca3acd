use nalgebra::{DMatrix, DVector};

use super::TargetDensity;
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

/// Tolerance on `sup |V_n(ξ) - ξ'Jξ/2|` required by the quadratic-closeness condition.
pub const CONDITION_A_THRESHOLD: f64 = 0.04;

const MAX_SCAN_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAReport {
    /// `max |V_n(ξ) - ξ'Jξ/2|` over the grid.
    pub potential_error: f64,
    /// `max ‖∇̃V_n(ξ) - Jξ‖` over the grid.
    pub gradient_error: f64,
    pub grid_points: usize,
    pub within_threshold: bool,
}

/// Points of the regular grid `step · Z^d` lying in `{ξ : ‖Ĩ^{-1/2} ξ‖ ≤ R}`.
pub fn grid_points_in_ellipsoid(precond: &SpdMatrix, radius: f64, step: f64) -> Result<Vec<DVector<f64>>> {
    let d = precond.dim();
    if d > MAX_SCAN_DIM {
        return Err(Error::UnsupportedDimension { dim: d, max: MAX_SCAN_DIM });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("grid step {step} must be positive")));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("radius {radius} must be non-negative")));
    }
    // bounding box of the ellipsoid: |ξ_i| ≤ R sqrt(Ĩ_ii)
    let extents: Vec<i64> = (0..d).map(|i| (radius * precond.matrix()[(i, i)].sqrt() / step).floor() as i64).collect();
    let limit = radius * (1.0 + 1e-12);
    let mut points = Vec::new();
    let mut idx: Vec<i64> = extents.iter().map(|e| -e).collect();
    loop {
        let xi = DVector::from_iterator(d, idx.iter().map(|&k| k as f64 * step));
        if (precond.inv_sqrt() * &xi).norm() <= limit {
            points.push(xi);
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(points);
            }
            if idx[axis] < extents[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = -extents[axis];
            axis += 1;
        }
    }
}

/// Grid scan of how far `V` is from the quadratic `ξ'Jξ/2` (and its
/// subgradient from `Jξ`) on the ellipsoid `‖Ĩ^{-1/2}ξ‖ ≤ R`. Dimension ≤ 3.
pub fn condition_a_scan(
    potential: &dyn TargetDensity,
    precision: &DMatrix<f64>,
    precond: &SpdMatrix,
    radius: f64,
    grid_step: f64,
) -> Result<ConditionAReport> {
    let d = potential.dim();
    if precision.shape() != (d, d) || precond.dim() != d {
        return Err(Error::InvalidInput("matrix dimensions do not match the potential".into()));
    }
    SpdMatrix::new(precision.clone())?;
    let points = grid_points_in_ellipsoid(precond, radius, grid_step)?;
    if points.is_empty() {
        return Err(Error::InvalidInput("scan grid contains no points".into()));
    }
    let mut potential_error: f64 = 0.0;
    let mut gradient_error: f64 = 0.0;
    for xi in &points {
        let (v, g) = potential.potential_and_subgrad(xi);
        let jxi = precision * xi;
        potential_error = potential_error.max((v - 0.5 * xi.dot(&jxi)).abs());
        gradient_error = gradient_error.max((g - jxi).norm());
    }
    Ok(ConditionAReport {
        potential_error,
        gradient_error,
        grid_points: points.len(),
        within_threshold: potential_error <= CONDITION_A_THRESHOLD,
    })
}
