use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::targets::TargetDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Langevin drift `-h̃ Ĩ ∇̃U` plus Gaussian noise.
    Mala,
    /// Gaussian noise only.
    Mrw,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Mala => "mala",
            SamplerKind::Mrw => "mrw",
        }
    }
}

/// Proposal geometry. `Identity` skips all matrix products.
#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    Identity(usize),
    Matrix(SpdMatrix),
}

impl Preconditioner {
    pub fn dim(&self) -> usize {
        match self {
            Preconditioner::Identity(d) => *d,
            Preconditioner::Matrix(m) => m.dim(),
        }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Preconditioner::Identity(_) => v.clone(),
            Preconditioner::Matrix(m) => m.matrix() * v,
        }
    }

    fn apply_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Preconditioner::Identity(_) => v.clone(),
            Preconditioner::Matrix(m) => m.sqrt() * v,
        }
    }

    /// `‖Ĩ^{-1/2} v‖²`.
    fn whitened_norm_sq(&self, v: &DVector<f64>) -> f64 {
        match self {
            Preconditioner::Identity(_) => v.norm_squared(),
            Preconditioner::Matrix(m) => (m.inv_sqrt() * v).norm_squared(),
        }
    }

    fn log_det(&self) -> f64 {
        match self {
            Preconditioner::Identity(_) => 0.0,
            Preconditioner::Matrix(m) => m.log_det(),
        }
    }

    pub fn op_norm(&self) -> f64 {
        match self {
            Preconditioner::Identity(_) => 1.0,
            Preconditioner::Matrix(m) => m.op_norm(),
        }
    }
}

/// Proposal `N(θ - h̃ Ĩ ∇̃U(θ), 2h̃ Ĩ)` (MALA) or `N(θ, 2h̃ Ĩ)` (MRW),
/// wrapped in a ζ-lazy hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSpec {
    kind: SamplerKind,
    step: f64,
    precond: Preconditioner,
    lazy: f64,
}

impl ProposalSpec {
    pub fn new(kind: SamplerKind, step: f64, precond: Preconditioner, lazy: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidInput(format!("step size {step} must be positive")));
        }
        if !(0.0..=0.5).contains(&lazy) {
            return Err(Error::InvalidInput(format!("lazy parameter {lazy} outside [0, 1/2]")));
        }
        Ok(Self { kind, step, precond, lazy })
    }

    pub fn mala(step: f64, d: usize) -> Result<Self> {
        Self::new(SamplerKind::Mala, step, Preconditioner::Identity(d), 0.0)
    }

    pub fn mrw(step: f64, d: usize) -> Result<Self> {
        Self::new(SamplerKind::Mrw, step, Preconditioner::Identity(d), 0.0)
    }

    pub fn preconditioned_mala(step: f64, precond: SpdMatrix) -> Result<Self> {
        Self::new(SamplerKind::Mala, step, Preconditioner::Matrix(precond), 0.0)
    }

    pub fn with_lazy(self, lazy: f64) -> Result<Self> {
        Self::new(self.kind, self.step, self.precond, lazy)
    }

    pub fn with_step(&self, step: f64) -> Result<Self> {
        Self::new(self.kind, step, self.precond.clone(), self.lazy)
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn precond(&self) -> &Preconditioner {
        &self.precond
    }
    pub fn lazy(&self) -> f64 {
        self.lazy
    }
    pub fn dim(&self) -> usize {
        self.precond.dim()
    }

    /// Mean of the proposal from `from`, given `∇̃U(from)`.
    fn proposal_mean(&self, from: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            SamplerKind::Mala => from - self.precond.apply(grad) * self.step,
            SamplerKind::Mrw => from.clone(),
        }
    }

    /// `log Q(from, to)` with normalising constants, given `∇̃U(from)`.
    pub(crate) fn log_q_with_grad(&self, from: &DVector<f64>, grad: &DVector<f64>, to: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let var = 2.0 * self.step;
        let r = to - self.proposal_mean(from, grad);
        -0.5 * d * (2.0 * PI * var).ln()
            - 0.5 * self.precond.log_det()
            - self.precond.whitened_norm_sq(&r) / (2.0 * var)
    }

    /// `log Q(y, x) - log Q(x, y)`; normalising constants cancel and are left out.
    pub(crate) fn log_q_ratio(
        &self,
        x: &DVector<f64>,
        grad_x: &DVector<f64>,
        y: &DVector<f64>,
        grad_y: &DVector<f64>,
    ) -> f64 {
        match self.kind {
            SamplerKind::Mrw => 0.0,
            SamplerKind::Mala => {
                let var2 = 4.0 * self.step;
                let fwd = self.precond.whitened_norm_sq(&(y - self.proposal_mean(x, grad_x)));
                let bwd = self.precond.whitened_norm_sq(&(x - self.proposal_mean(y, grad_y)));
                (fwd - bwd) / var2
            }
        }
    }
}

/// Deterministic part of the proposal: `y = θ - h̃ Ĩ g + sqrt(2h̃) Ĩ^{1/2} z`
/// (the drift term is dropped for MRW).
pub fn propose_with_noise(
    spec: &ProposalSpec,
    theta: &DVector<f64>,
    grad: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let noise = spec.precond.apply_sqrt(z) * (2.0 * spec.step).sqrt();
    spec.proposal_mean(theta, grad) + noise
}

pub(crate) fn draw_normals<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws a candidate from `Q(θ, ·)`; consumes exactly `d` standard normals.
pub fn propose<R: Rng + ?Sized>(
    spec: &ProposalSpec,
    theta: &DVector<f64>,
    grad: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let z = draw_normals(rng, spec.dim());
    propose_with_noise(spec, theta, grad, &z)
}

/// `log Q(from, to)` including normalising constants.
pub fn log_q(spec: &ProposalSpec, target: &dyn TargetDensity, from: &DVector<f64>, to: &DVector<f64>) -> f64 {
    let grad = match spec.kind {
        SamplerKind::Mala => target.subgrad(from),
        SamplerKind::Mrw => DVector::zeros(from.len()),
    };
    spec.log_q_with_grad(from, &grad, to)
}

pub(crate) fn acceptance_from_parts(
    spec: &ProposalSpec,
    x: &DVector<f64>,
    ux: f64,
    gx: &DVector<f64>,
    y: &DVector<f64>,
    uy: f64,
    gy: &DVector<f64>,
) -> f64 {
    if !uy.is_finite() {
        return 0.0;
    }
    let log_ratio = ux - uy + spec.log_q_ratio(x, gx, y, gy);
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Metropolis–Hastings acceptance probability `1 ∧ f(y)Q(y,x) / f(x)Q(x,y)`.
pub fn acceptance(target: &dyn TargetDensity, spec: &ProposalSpec, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let (ux, gx) = target.potential_and_subgrad(x);
    if !ux.is_finite() {
        return Err(Error::InvalidState(format!("U(x) = {ux}")));
    }
    let (uy, gy) = target.potential_and_subgrad(y);
    Ok(acceptance_from_parts(spec, x, ux, &gx, y, uy, &gy))
}
