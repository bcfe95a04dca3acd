use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix_io::{load_matrix, save_matrix};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Row-stochastic matrix together with a stationary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChain {
    transition: DMatrix<f64>,
    stationary: DVector<f64>,
}

fn check_transition(t: &DMatrix<f64>) -> Result<()> {
    if t.nrows() != t.ncols() || t.nrows() == 0 {
        return Err(Error::InvalidInput("transition matrix must be square and nonempty".into()));
    }
    if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput("transition entries must be finite and nonnegative".into()));
    }
    for (i, row) in t.row_iter().enumerate() {
        let s: f64 = row.sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidInput(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

impl DiscreteChain {
    /// Chain with a given stationary distribution; checks `πT = π`.
    pub fn new(transition: DMatrix<f64>, stationary: DVector<f64>) -> Result<Self> {
        check_transition(&transition)?;
        if stationary.len() != transition.nrows() {
            return Err(Error::InvalidInput("stationary vector has the wrong length".into()));
        }
        if stationary.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidInput("stationary entries must be positive".into()));
        }
        if (stationary.sum() - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidInput("stationary distribution does not sum to 1".into()));
        }
        let residual = (transition.tr_mul(&stationary) - &stationary).amax();
        if residual > STATIONARY_TOL {
            return Err(Error::InvalidInput(format!("πT differs from π by {residual:e}")));
        }
        Ok(Self { transition, stationary })
    }

    /// Solves `π(T − I) = 0, Σπ = 1` directly. Fails for chains without a
    /// unique positive stationary distribution.
    pub fn from_transition(transition: DMatrix<f64>) -> Result<Self> {
        check_transition(&transition)?;
        let m = transition.nrows();
        let mut a = transition.transpose() - DMatrix::identity(m, m);
        a.row_mut(m - 1).fill(1.0);
        let mut b = DVector::zeros(m);
        b[m - 1] = 1.0;
        let pi =
            a.lu().solve(&b).ok_or_else(|| Error::NoConvergence("stationary distribution is not unique".into()))?;
        if pi.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::NoConvergence("stationary distribution has a zero entry".into()));
        }
        let pi = &pi / pi.sum();
        Self::new(transition, pi)
    }

    pub fn size(&self) -> usize {
        self.stationary.len()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    /// `max |π_i T_ij − π_j T_ji|`.
    pub fn reversibility_residual(&self) -> f64 {
        let m = self.size();
        let mut r: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                let a = self.stationary[i] * self.transition[(i, j)];
                let b = self.stationary[j] * self.transition[(j, i)];
                r = r.max((a - b).abs());
            }
        }
        r
    }

    pub fn is_reversible(&self) -> bool {
        self.reversibility_residual() <= STATIONARY_TOL
    }

    /// Smallest diagonal entry.
    pub fn laziness(&self) -> f64 {
        self.transition.diagonal().min()
    }

    /// `ζI + (1 − ζ)T`; same stationary distribution.
    pub fn lazy(&self, zeta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&zeta) {
            return Err(Error::InvalidInput("laziness must lie in [0, 1)".into()));
        }
        let m = self.size();
        let t = DMatrix::identity(m, m) * zeta + &self.transition * (1.0 - zeta);
        Ok(Self { transition: renormalize_rows(t), stationary: self.stationary.clone() })
    }

    /// Writes `T` as a CSV matrix.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_matrix(path, &self.transition)
    }

    /// Reads `T` and solves for `π`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_transition(load_matrix(path)?)
    }
}

/// Puts rounding residue of each row on its diagonal. An off-diagonal sum
/// that rounds just above one leaves a zero diagonal rather than a negative one.
pub(crate) fn renormalize_rows(mut t: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..t.nrows() {
        let off: f64 = (0..t.ncols()).filter(|&j| j != i).map(|j| t[(i, j)]).sum();
        t[(i, i)] = (1.0 - off).max(0.0);
    }
    t
}

/// Metropolised random symmetric proposal, made ½-lazy. Some proposal
/// entries are zeroed so sparse chains also appear, but the proposal
/// graph always contains a path through all states.
pub fn random_reversible_lazy_chain<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Result<DiscreteChain> {
    if m < 2 {
        return Err(Error::InvalidInput("need at least two states".into()));
    }
    let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let pi = DVector::from_iterator(m, weights.iter().map(|w| w / total));
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let w = if j == i + 1 || rng.random_bool(0.6) { rng.random_range(0.01..1.0) } else { 0.0 };
            k[(i, j)] = w;
            k[(j, i)] = w;
        }
    }
    let max_row = k.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    k /= max_row;
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                t[(i, j)] = k[(i, j)] * (pi[j] / pi[i]).min(1.0);
            }
        }
    }
    DiscreteChain::new(renormalize_rows(t), pi)?.lazy(0.5)
}
