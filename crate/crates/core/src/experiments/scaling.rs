use std::io::Write;

use nalgebra::DVector;
use rand::Rng;

use crate::diagnostics::ess_slice;
use crate::error::{Error, Result};
use crate::samplers::{chain_rng, mala_step_size, run_chain, ProposalSpec, RunOptions, StepSizeInputs, Trace};
use crate::targets::GaussianTarget;

const INIT_STREAM: u64 = 1 << 41;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Dimension-dependent step with `ρ₂ = κ = 1`, `ε̃₁ = 0`, log terms off.
    Theorem,
    /// Same step at every dimension.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub rule: &'static str,
    pub d: usize,
    pub h: f64,
    pub acceptance_rate: f64,
    pub ess_per_step: f64,
}

/// Theorem step with `M₀ = 1` and `ε = d`, which makes `log(M₀dκ/ε) = 0`.
fn theorem_step(d: usize, c0: f64) -> Result<f64> {
    mala_step_size(&StepSizeInputs::isotropic(d, 1.0, d as f64, c0))
}

/// One MALA chain on `N_d(0, I)` started from an exact draw.
pub fn scaling_chain(d: usize, h: f64, steps: usize, seed: u64) -> Result<Trace> {
    let target = GaussianTarget::standard(d);
    let mut rng = chain_rng(seed, INIT_STREAM + d as u64);
    let init = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let spec = ProposalSpec::mala(h, d)?;
    run_chain(&target, &spec, &init, RunOptions { n_steps: steps, thin: 1, seed, chain_id: d as u64 })
}

pub fn run_scaling_study(dims: &[usize], c0: f64, steps: usize, seed: u64, rule: StepRule) -> Result<Vec<ScalingRow>> {
    if dims.windows(2).any(|w| w[0] >= w[1]) || dims.contains(&0) {
        return Err(Error::InvalidInput("dims must be positive and strictly increasing".into()));
    }
    dims.iter()
        .map(|&d| {
            let (name, h) = match rule {
                StepRule::Theorem => ("theorem", theorem_step(d, c0)?),
                StepRule::Constant(h) => ("constant", h),
            };
            let trace = scaling_chain(d, h, steps, seed)?;
            let ess = (0..d)
                .map(|j| ess_slice(&trace.samples.as_slice()[j * steps..(j + 1) * steps]))
                .collect::<Result<Vec<_>>>()?;
            Ok(ScalingRow {
                rule: name,
                d,
                h,
                acceptance_rate: trace.acceptance_rate,
                ess_per_step: ess.iter().sum::<f64>() / (d * steps) as f64,
            })
        })
        .collect()
}

/// `rule,d,h,acceptance_rate,ess_per_step`.
pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], mut w: W) -> Result<()> {
    writeln!(w, "rule,d,h,acceptance_rate,ess_per_step")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.rule, r.d, r.h, r.acceptance_rate, r.ess_per_step)?;
    }
    Ok(())
}
