use std::fs::File;
use std::io::{BufWriter, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Open01};
use rayon::prelude::*;

use super::{ExperimentConfig, SamplerChoice};
use crate::diagnostics::{ess_slice, first_crossing_from, DiagnosticsReport, ReportOptions};
use crate::error::{Error, Result};
use crate::estimation::{empirical_gram_precond, minimize_empirical_risk, ErmConfig};
use crate::linalg::SpdMatrix;
use crate::matrix_io::save_matrix;
use crate::samplers::{
    chain_rng, mala_step_size, run_chains, tune_step, warm_start_sample, write_metadata, ChainRunner, ProposalSpec,
    RunOptions, StepSizeInputs, Trace, TuneConfig, WarmStartSpec,
};
use crate::targets::{gibbs_potential, CheckLoss, Dataset, GibbsSpec, Prior, RescaledPotential, TargetDensity};

// stream indices reserved for experiment randomness
const DATA_STREAM: u64 = 1 << 40;
const START_STREAM: u64 = 2 << 40;
const SEED_STREAM: u64 = 3 << 40;

fn laplace(rng: &mut impl Rng, location: f64, scale: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    let u = u - 0.5;
    location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Covariates `N(0, Σ)` with unit diagonal and off-diagonal `c_off`,
/// responses `x'θ* + e` with Laplace noise drawn by inverse CDF.
pub fn generate_quantile_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    let sigma = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { cfg.c_off });
    let l = sigma.cholesky().ok_or_else(|| Error::NotSpd("covariate covariance".into()))?.unpack();
    let theta = DVector::from_vec(cfg.theta_star());
    let mut rng = chain_rng(cfg.seed, DATA_STREAM);
    let mut covariates = Vec::with_capacity(n * d);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let x = &l * z;
        responses.push(x.dot(&theta) + laplace(&mut rng, cfg.noise_location, cfg.noise_scale));
        covariates.extend(x.iter().copied());
    }
    Dataset::from_rows(n, d, covariates, responses)
}

/// `ξ₀ = spread · Ĩ^{1/2} z` in rescaled coordinates, one `z` per chain
/// index, shared across samplers.
pub fn overdispersed_starts(cfg: &ExperimentConfig, precond: &SpdMatrix) -> Vec<DVector<f64>> {
    let mut rng = chain_rng(cfg.seed, START_STREAM);
    (0..cfg.chains)
        .map(|_| {
            let z = DVector::from_fn(precond.dim(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            precond.sqrt() * z * cfg.spread
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SamplerSummary {
    pub sampler: SamplerChoice,
    pub c0: f64,
    pub step: f64,
    /// Mean acceptance over the main chains.
    pub acceptance: f64,
    pub iters_to_rhat: Option<usize>,
    /// Per coordinate.
    pub iters_to_ess: Vec<Option<usize>>,
    /// Per coordinate, ESS of the first `ess_at` iterations averaged over chains.
    pub ess_at: Vec<f64>,
    pub report: DiagnosticsReport,
}

impl SamplerSummary {
    pub fn ess_at_mean(&self) -> f64 {
        self.ess_at.iter().sum::<f64>() / self.ess_at.len() as f64
    }

    pub fn iters_to_ess_max(&self) -> Option<usize> {
        self.iters_to_ess.iter().copied().collect::<Option<Vec<_>>>().and_then(|v| v.into_iter().max())
    }
}

#[derive(Debug, Clone)]
pub struct QuantileReport {
    pub tau: f64,
    pub seed: u64,
    pub theta_hat: DVector<f64>,
    pub precond: SpdMatrix,
    pub samplers: Vec<SamplerSummary>,
}

impl QuantileReport {
    pub fn summary(&self, s: SamplerChoice) -> Option<&SamplerSummary> {
        self.samplers.iter().find(|x| x.sampler == s)
    }
}

fn mean_ess(traces: &[Trace], coord: usize, len: usize) -> Result<f64> {
    let mut total = 0.0;
    for t in traces {
        let n = t.len();
        let col = &t.samples.as_slice()[coord * n..coord * n + len.min(n)];
        total += ess_slice(col)?;
    }
    Ok(total / traces.len() as f64)
}

/// Smallest multiple of `stride` whose prefix reaches `target` mean ESS:
/// doubling, then bisection, treating ESS as increasing in the prefix.
fn iterations_to_ess(traces: &[Trace], coord: usize, target: f64, stride: usize) -> Result<Option<usize>> {
    let len = traces[0].len();
    let units = len / stride;
    let reaches = |k: usize| -> Result<bool> {
        let p = k * stride;
        if p < 10 {
            return Ok(false);
        }
        match mean_ess(traces, coord, p) {
            Ok(e) => Ok(e >= target),
            // some chain has not moved yet
            Err(Error::DegenerateChains(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if units == 0 || !reaches(units)? {
        return Ok(None);
    }
    let mut hi = 1;
    while hi < units && !reaches(hi)? {
        hi = (hi * 2).min(units);
    }
    let mut lo = hi / 2; // fails, or zero
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi * stride))
}

const SEGMENT: usize = 1000;
const PILOT_CHAINS: usize = 16;
/// Acceptance tolerance when tuning `c₀`.
const TUNE_TOLERANCE: f64 = 0.01;

/// Runs the chains in segments until the shrink factor and every
/// coordinate's ESS have reached their targets and at least `ess_at`
/// iterations exist, or `max_iters` is reached. Stopping early does not
/// change any reported quantity, which only looks at prefixes.
fn run_until_diagnosed(
    target: &RescaledPotential,
    spec: &ProposalSpec,
    starts: &[DVector<f64>],
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<Vec<Trace>> {
    let mut runners = starts
        .iter()
        .enumerate()
        .map(|(i, s)| ChainRunner::new(target, spec, s, RunOptions { n_steps: 0, thin: 1, seed, chain_id: i as u64 }))
        .collect::<Result<Vec<_>>>()?;
    let mut crossed = false;
    loop {
        let done = runners[0].iterations();
        let n = SEGMENT.min(cfg.max_iters - done);
        runners.par_iter_mut().try_for_each(|r| r.advance(n))?;
        let traces: Vec<Trace> = runners.iter().map(ChainRunner::trace).collect();
        let len = done + n;
        if len >= cfg.max_iters {
            return Ok(traces);
        }
        // prefixes up to `done` were already checked and stay the same
        crossed = crossed || first_crossing_from(&traces, cfg.threshold, cfg.stride, done + 1)?.is_some();
        if len >= cfg.ess_at && crossed {
            // `iterations_to_ess` finds a crossing exactly when the longest
            // evaluated prefix reaches the target
            let p = len / cfg.stride * cfg.stride;
            let mut all = p >= 10;
            for j in 0..target.dim() {
                if !all {
                    break;
                }
                all = match mean_ess(&traces, j, p) {
                    Ok(e) => e >= cfg.ess_target,
                    Err(Error::DegenerateChains(_)) => false,
                    Err(e) => return Err(e),
                };
            }
            if all {
                return Ok(traces);
            }
        }
    }
}

struct Setup {
    target: RescaledPotential,
    theta_hat: DVector<f64>,
    precond: SpdMatrix,
    base_step: f64,
    pilots: Vec<DVector<f64>>,
    seeder: crate::samplers::ChainRng,
}

fn setup(cfg: &ExperimentConfig, data: Arc<Dataset>) -> Result<Setup> {
    cfg.validate()?;
    let d = data.dim();
    let spec = GibbsSpec::new(
        data.clone(),
        Arc::new(CheckLoss::new(cfg.tau)?),
        cfg.learning_rate,
        Prior::symmetric_box(d, cfg.prior_half_width)?,
    )?;
    let erm = minimize_empirical_risk(&spec, &DVector::zeros(d), &ErmConfig::default())?;
    let precond = empirical_gram_precond(&data)?;
    let target = RescaledPotential::new(gibbs_potential(spec)?, erm.theta.clone())?;
    let base_step = mala_step_size(&StepSizeInputs::isotropic(d, cfg.warmness, cfg.tolerance, 1.0))?;
    let mut seeder = chain_rng(cfg.seed, SEED_STREAM);
    let pilot_spec =
        WarmStartSpec { center: DVector::zeros(d), scale_n: 1.0, precond: precond.clone(), radius: f64::INFINITY };
    let pilots = (0..PILOT_CHAINS).map(|_| warm_start_sample(&pilot_spec, &mut seeder)).collect::<Result<Vec<_>>>()?;
    Ok(Setup { target, theta_hat: erm.theta, precond, base_step, pilots, seeder })
}

/// Proposal for `choice` with `c₀` from the config or tuned on pilot chains.
fn sampler_spec(
    setup: &Setup,
    cfg: &ExperimentConfig,
    choice: SamplerChoice,
    tune_seed: u64,
) -> Result<(f64, ProposalSpec)> {
    let d = setup.theta_hat.len();
    let base = match choice {
        SamplerChoice::Mrw => ProposalSpec::mrw(setup.base_step, d)?,
        SamplerChoice::Mala => ProposalSpec::mala(setup.base_step, d)?,
        SamplerChoice::PMala => ProposalSpec::preconditioned_mala(setup.base_step, setup.precond.clone())?,
    };
    let c0 = match cfg.c0_for(choice) {
        Some(c) => c,
        None => {
            let tc = TuneConfig {
                warmup_steps: cfg.warmup,
                seed: tune_seed,
                tolerance: TUNE_TOLERANCE,
                ..TuneConfig::default()
            };
            tune_step(&setup.target, &base, setup.base_step, &setup.pilots, &tc)?.c0
        }
    };
    Ok((c0, base.with_step(c0 * setup.base_step)?))
}

/// Fits `θ̂`, builds the inverse-Gram preconditioner and runs each
/// configured sampler on the rescaled potential from overdispersed starts.
pub fn run_quantile_experiment(cfg: &ExperimentConfig) -> Result<QuantileReport> {
    let data = Arc::new(generate_quantile_data(cfg)?);
    let d = cfg.d;
    let mut setup = setup(cfg, data)?;
    let starts = overdispersed_starts(cfg, &setup.precond);

    let mut samplers = Vec::new();
    for &choice in &cfg.samplers {
        let tune_seed: u64 = setup.seeder.random();
        let run_seed: u64 = setup.seeder.random();
        let (c0, spec) = sampler_spec(&setup, cfg, choice, tune_seed)?;
        let traces = run_until_diagnosed(&setup.target, &spec, &starts, run_seed, cfg)?;
        let report =
            DiagnosticsReport::compute(&traces, &ReportOptions { stride: cfg.stride, threshold: cfg.threshold }, None)?;
        let ess_at = (0..d).map(|j| mean_ess(&traces, j, cfg.ess_at)).collect::<Result<Vec<_>>>()?;
        let iters_to_ess =
            (0..d).map(|j| iterations_to_ess(&traces, j, cfg.ess_target, cfg.stride)).collect::<Result<Vec<_>>>()?;
        let acceptance = traces.iter().map(|t| t.acceptance_rate).sum::<f64>() / traces.len() as f64;
        samplers.push(SamplerSummary {
            sampler: choice,
            c0,
            step: spec.step(),
            acceptance,
            iters_to_rhat: report.iters_to_threshold_max,
            iters_to_ess,
            ess_at,
            report,
        });
    }
    Ok(QuantileReport { tau: cfg.tau, seed: cfg.seed, theta_hat: setup.theta_hat, precond: setup.precond, samplers })
}

/// Runs `cfg.chains` chains of `choice` on the check-loss Gibbs posterior of
/// `data`, started from the overdispersed starts, for `steps` steps. Samples
/// are returned in the original parameter coordinates. Also returns `c₀`.
pub fn sample_quantile_posterior(
    cfg: &ExperimentConfig,
    data: Dataset,
    choice: SamplerChoice,
    steps: usize,
) -> Result<(f64, Vec<Trace>)> {
    let mut setup = setup(cfg, Arc::new(data))?;
    let starts = overdispersed_starts(cfg, &setup.precond);
    let tune_seed: u64 = setup.seeder.random();
    let run_seed: u64 = setup.seeder.random();
    let (c0, spec) = sampler_spec(&setup, cfg, choice, tune_seed)?;
    let mut traces = run_chains(&setup.target, &spec, &starts, steps, 1, run_seed)?;
    let scale = 1.0 / setup.target.sqrt_n();
    for t in &mut traces {
        for (j, mut col) in t.samples.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = setup.theta_hat[j] + *v * scale;
            }
        }
    }
    Ok((c0, traces))
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "NA".to_string(), |k| k.to_string())
}

/// Writes `summary.csv`, per-sampler `rhat_<name>.csv` and `ess_<name>.csv`,
/// `theta_hat.csv`, `precond.csv` and `metadata.txt` into `cfg.out`.
pub fn write_quantile_outputs(cfg: &ExperimentConfig, report: &QuantileReport) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    let d = report.theta_hat.len();
    let mut w = BufWriter::new(File::create(cfg.out.join("summary.csv"))?);
    let ess_cols: Vec<String> = (1..=d).map(|j| format!("ess_at_{j}")).collect();
    writeln!(w, "sampler,tau,seed,c0,step,acceptance,iters_to_rhat,iters_to_ess,ess_at_mean,{}", ess_cols.join(","))?;
    for s in &report.samplers {
        let per: Vec<String> = s.ess_at.iter().map(|e| e.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.sampler,
            report.tau,
            report.seed,
            s.c0,
            s.step,
            s.acceptance,
            opt(s.iters_to_rhat),
            opt(s.iters_to_ess_max()),
            s.ess_at_mean(),
            per.join(",")
        )?;
    }
    w.flush()?;
    for s in &report.samplers {
        s.report.write_rhat_csv(BufWriter::new(File::create(cfg.out.join(format!("rhat_{}.csv", s.sampler)))?))?;
        s.report.write_ess_csv(BufWriter::new(File::create(cfg.out.join(format!("ess_{}.csv", s.sampler)))?))?;
    }
    save_matrix(cfg.out.join("theta_hat.csv"), &DMatrix::from_column_slice(1, d, report.theta_hat.as_slice()))?;
    save_matrix(cfg.out.join("precond.csv"), report.precond.matrix())?;
    let meta = vec![
        ("experiment", "quantile".to_string()),
        ("seed", cfg.seed.to_string()),
        ("n", cfg.n.to_string()),
        ("d", cfg.d.to_string()),
        ("tau", cfg.tau.to_string()),
        ("chains", cfg.chains.to_string()),
        ("max_iters", cfg.max_iters.to_string()),
        ("spread", cfg.spread.to_string()),
        ("threshold", cfg.threshold.to_string()),
    ];
    write_metadata(&meta, BufWriter::new(File::create(cfg.out.join("metadata.txt"))?))?;
    Ok(())
}
