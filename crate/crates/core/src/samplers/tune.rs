use nalgebra::DVector;

use super::chain::run_chains;
use super::proposal::ProposalSpec;
use crate::error::{Error, Result};
use crate::targets::TargetDensity;

/// Bisection of the step multiplier `c₀` on pilot-run acceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    pub warmup_steps: usize,
    /// Acceptance band the result must land in.
    pub band: (f64, f64),
    /// Bisection aims here and stops within `tolerance` of it.
    pub target: f64,
    pub tolerance: f64,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { warmup_steps: 500, band: (0.5, 0.7), target: 0.6, tolerance: 0.025, max_evals: 40, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub c0: f64,
    /// `c₀ · base_step`.
    pub step: f64,
    pub acceptance: f64,
    pub evaluations: usize,
}

fn mean_acceptance(
    target: &dyn TargetDensity,
    spec: &ProposalSpec,
    inits: &[DVector<f64>],
    cfg: &TuneConfig,
) -> Result<f64> {
    let traces = run_chains(target, spec, inits, cfg.warmup_steps, cfg.warmup_steps, cfg.seed)?;
    Ok(traces.iter().map(|t| t.acceptance_rate).sum::<f64>() / traces.len() as f64)
}

/// Finds `c₀` so that pilot chains with step `c₀ · base_step` have mean
/// acceptance within `cfg.band`. Pilot runs are discarded.
pub fn tune_step(
    target: &dyn TargetDensity,
    spec: &ProposalSpec,
    base_step: f64,
    inits: &[DVector<f64>],
    cfg: &TuneConfig,
) -> Result<TuneResult> {
    if inits.is_empty() {
        return Err(Error::InvalidInput("tuning needs at least one pilot chain".into()));
    }
    let (lo_band, hi_band) = cfg.band;
    if !(0.0 < lo_band && lo_band <= cfg.target && cfg.target <= hi_band && hi_band < 1.0) {
        return Err(Error::InvalidInput("inconsistent acceptance band".into()));
    }
    let evals = std::cell::Cell::new(0usize);
    let eval = |c0: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        mean_acceptance(target, &spec.with_step(c0 * base_step)?, inits, cfg)
    };

    // acceptance decreases in c₀: bracket the target on a log scale, then bisect
    let mut c0 = 1.0;
    let mut acc = eval(c0)?;
    let (mut lo, mut hi); // lo: acceptance above target, hi: below
    if acc >= cfg.target {
        lo = (c0, acc);
        loop {
            let c = lo.0 * 4.0;
            let a = eval(c)?;
            if a < cfg.target {
                hi = (c, a);
                break;
            }
            lo = (c, a);
            if c > 1e12 {
                return Err(Error::NoConvergence("acceptance never drops below target".into()));
            }
        }
    } else {
        hi = (c0, acc);
        loop {
            let c = hi.0 / 4.0;
            let a = eval(c)?;
            if a >= cfg.target {
                lo = (c, a);
                break;
            }
            hi = (c, a);
            if c < 1e-12 {
                return Err(Error::NoConvergence("acceptance never rises to target".into()));
            }
        }
    }
    let mut best = if (lo.1 - cfg.target).abs() <= (hi.1 - cfg.target).abs() { lo } else { hi };
    while (best.1 - cfg.target).abs() > cfg.tolerance && evals.get() < cfg.max_evals {
        c0 = (lo.0 * hi.0).sqrt();
        acc = eval(c0)?;
        if acc >= cfg.target {
            lo = (c0, acc);
        } else {
            hi = (c0, acc);
        }
        if (acc - cfg.target).abs() < (best.1 - cfg.target).abs() {
            best = (c0, acc);
        }
    }
    if !(lo_band..=hi_band).contains(&best.1) {
        return Err(Error::NoConvergence(format!(
            "best pilot acceptance {:.3} outside [{lo_band}, {hi_band}]",
            best.1
        )));
    }
    Ok(TuneResult { c0: best.0, step: best.0 * base_step, acceptance: best.1, evaluations: evals.get() })
}
