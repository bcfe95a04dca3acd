use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gibbs_mala::diagnostics::{DiagnosticsReport, ReportOptions};
use gibbs_mala::experiments::{
    generate_quantile_data, run_conductance_batch, run_quantile_experiment, run_scaling_study,
    sample_quantile_posterior, write_batch_csv, write_quantile_outputs, write_scaling_csv, ExperimentConfig,
    SamplerChoice, StepRule,
};
use gibbs_mala::samplers::{read_trace_csv, write_metadata, write_trace_csv};
use gibbs_mala::targets::Dataset;

/// Langevin and random-walk samplers for Gibbs posteriors, with
/// convergence diagnostics and a finite-chain conductance lab.
#[derive(Parser, Debug)]
#[command(name = "gibbs-mala", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Quantile level of the check loss.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Step multiplier; omit to auto-tune.
    #[arg(long, global = true)]
    c0: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the quantile-regression Gibbs posterior and write traces.
    Sample {
        /// Data CSV with header `y,x1,...,xd`; generated from the config if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "pmala")]
        sampler: String,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
    },
    /// Gelman–Rubin and ESS diagnostics for trace CSVs.
    Diagnose {
        #[arg(required = true, num_args = 2..)]
        traces: Vec<PathBuf>,
    },
    /// MRW vs MALA vs preconditioned MALA on simulated quantile regression.
    QuantileExp,
    /// Acceptance and ESS of MALA on standard Gaussians across dimensions.
    Scaling,
    /// Mixing-bound checks on random reversible lazy chains.
    Conductance,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.n {
        cfg.n = v;
    }
    if let Some(v) = common.d {
        cfg.d = v;
        if cfg.theta_star.as_ref().is_some_and(|t| t.len() != v) {
            cfg.theta_star = None;
        }
    }
    if let Some(v) = common.tau {
        cfg.tau = v;
    }
    if let Some(v) = common.c0 {
        cfg.c0 = Some(v);
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("`{kv}` is not key=value"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn sample(cfg: &ExperimentConfig, data: Option<&Path>, sampler: &str, steps: usize) -> Result<()> {
    let choice: SamplerChoice = sampler.parse()?;
    let data = match data {
        Some(p) => Dataset::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => generate_quantile_data(cfg)?,
    };
    let mut cfg = cfg.clone();
    cfg.d = data.dim();
    cfg.n = data.n();
    if cfg.theta_star.as_ref().is_some_and(|t| t.len() != cfg.d) {
        cfg.theta_star = None;
    }
    let (c0, traces) = sample_quantile_posterior(&cfg, data, choice, steps)?;
    std::fs::create_dir_all(&cfg.out)?;
    for (i, t) in traces.iter().enumerate() {
        let mut w = create(&cfg.out, &format!("trace_{i}.csv"))?;
        write_trace_csv(t, &mut w)?;
        w.flush()?;
    }
    let meta = vec![
        ("sampler", choice.to_string()),
        ("seed", cfg.seed.to_string()),
        ("tau", cfg.tau.to_string()),
        ("c0", c0.to_string()),
        ("steps", steps.to_string()),
        ("chains", traces.len().to_string()),
    ];
    let mut w = create(&cfg.out, "metadata.txt")?;
    write_metadata(&meta, &mut w)?;
    w.flush()?;
    let acc: f64 = traces.iter().map(|t| t.acceptance_rate).sum::<f64>() / traces.len() as f64;
    println!("{} chains of {steps} steps, c0 = {c0:.4}, mean acceptance {acc:.3}", traces.len());
    Ok(())
}

fn diagnose(cfg: &ExperimentConfig, paths: &[PathBuf]) -> Result<()> {
    let traces = paths
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            read_trace_csv(f).with_context(|| format!("reading {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let report =
        DiagnosticsReport::compute(&traces, &ReportOptions { stride: cfg.stride, threshold: cfg.threshold }, None)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, "rhat.csv")?;
    report.write_rhat_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&cfg.out, "ess.csv")?;
    report.write_ess_csv(&mut w)?;
    w.flush()?;
    match report.iters_to_threshold_max {
        Some(k) => println!("shrink factor below {} after {k} iterations", cfg.threshold),
        None => println!("shrink factor never below {}", cfg.threshold),
    }
    for (j, e) in report.ess.iter().enumerate() {
        println!("coord {}: ess {e:.1}", j + 1);
    }
    Ok(())
}

fn quantile(cfg: &ExperimentConfig) -> Result<()> {
    let report = run_quantile_experiment(cfg)?;
    write_quantile_outputs(cfg, &report)?;
    println!("sampler  c0        accept  iters_rhat  iters_ess  ess_at_{}", cfg.ess_at);
    let na = |v: Option<usize>| v.map_or_else(|| "NA".to_string(), |k| k.to_string());
    for s in &report.samplers {
        println!(
            "{:<8} {:<9.4} {:<7.3} {:<11} {:<10} {:.1}",
            s.sampler.name(),
            s.c0,
            s.acceptance,
            na(s.iters_to_rhat),
            na(s.iters_to_ess_max()),
            s.ess_at_mean()
        );
    }
    Ok(())
}

fn scaling(cfg: &ExperimentConfig) -> Result<()> {
    let c0 = cfg.c0.unwrap_or(1.0);
    let mut rows = run_scaling_study(&cfg.dims, c0, cfg.steps, cfg.seed, StepRule::Theorem)?;
    let h_first = rows.first().map(|r| r.h).context("no dimensions given")?;
    rows.extend(run_scaling_study(&cfg.dims, c0, cfg.steps, cfg.seed, StepRule::Constant(h_first))?);
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, "scaling.csv")?;
    write_scaling_csv(&rows, &mut w)?;
    w.flush()?;
    for r in &rows {
        println!(
            "{:<9} d={:<4} h={:.4} acceptance={:.3} ess/step={:.4}",
            r.rule, r.d, r.h, r.acceptance_rate, r.ess_per_step
        );
    }
    Ok(())
}

fn conductance(cfg: &ExperimentConfig) -> Result<bool> {
    let rows = run_conductance_batch(cfg.seed, cfg.count, (cfg.min_states, cfg.max_states), cfg.m0, cfg.eps)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, "conductance.csv")?;
    write_batch_csv(&rows, &mut w)?;
    w.flush()?;
    let failed = rows.iter().filter(|r| !r.holds).count();
    println!("{} chains checked, {failed} violate the bound", rows.len());
    Ok(failed == 0)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Sample { data, sampler, steps } => sample(&cfg, data.as_deref(), sampler, *steps)?,
        Command::Diagnose { traces } => diagnose(&cfg, traces)?,
        Command::QuantileExp => quantile(&cfg)?,
        Command::Scaling => scaling(&cfg)?,
        Command::Conductance => {
            if cfg.count > 0 && !(2..=15).contains(&cfg.max_states) {
                bail!("max_states must lie in 2..=15");
            }
            return conductance(&cfg);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
