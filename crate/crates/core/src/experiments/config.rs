use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SamplerChoice {
    Mrw,
    Mala,
    /// MALA preconditioned with the inverse empirical Gram matrix.
    PMala,
}

impl SamplerChoice {
    pub fn name(self) -> &'static str {
        match self {
            SamplerChoice::Mrw => "mrw",
            SamplerChoice::Mala => "mala",
            SamplerChoice::PMala => "pmala",
        }
    }
}

impl FromStr for SamplerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mrw" => Ok(SamplerChoice::Mrw),
            "mala" => Ok(SamplerChoice::Mala),
            "pmala" => Ok(SamplerChoice::PMala),
            other => Err(Error::Parse(format!("unknown sampler `{other}`"))),
        }
    }
}

impl fmt::Display for SamplerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Quantile,
    Scaling,
    Conductance,
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quantile" => Ok(ExperimentKind::Quantile),
            "scaling" => Ok(ExperimentKind::Scaling),
            "conductance" => Ok(ExperimentKind::Conductance),
            other => Err(Error::Parse(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Settings for every experiment. Read from flat `key = value` text; `#`
/// starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out: PathBuf,

    // data
    pub n: usize,
    pub d: usize,
    /// Off-diagonal entry of the covariate covariance (unit diagonal).
    pub c_off: f64,
    pub noise_location: f64,
    pub noise_scale: f64,
    /// Defaults to `(1, 2, …, d)`.
    pub theta_star: Option<Vec<f64>>,

    // posterior
    pub tau: f64,
    pub learning_rate: f64,
    pub prior_half_width: f64,

    // samplers
    pub samplers: Vec<SamplerChoice>,
    /// Step multiplier for every sampler; `None` tunes it.
    pub c0: Option<f64>,
    pub c0_per_sampler: BTreeMap<SamplerChoice, f64>,
    pub warmup: usize,
    pub warmness: f64,
    pub tolerance: f64,
    pub chains: usize,
    pub max_iters: usize,
    pub spread: f64,

    // diagnostics
    pub threshold: f64,
    pub stride: usize,
    pub ess_target: f64,
    pub ess_at: usize,

    // scaling study
    pub dims: Vec<usize>,
    pub steps: usize,

    // conductance batch
    pub count: usize,
    pub min_states: usize,
    pub max_states: usize,
    pub m0: f64,
    pub eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Quantile,
            seed: 1,
            out: PathBuf::from("out"),
            n: 500,
            d: 5,
            c_off: 0.2,
            noise_location: 0.0,
            noise_scale: 2.0,
            theta_star: None,
            tau: 0.5,
            learning_rate: 1.0,
            prior_half_width: 100.0,
            samplers: vec![SamplerChoice::Mrw, SamplerChoice::Mala, SamplerChoice::PMala],
            c0: None,
            c0_per_sampler: BTreeMap::new(),
            warmup: 500,
            warmness: 10.0,
            tolerance: 0.1,
            chains: 128,
            max_iters: 30_000,
            spread: 5.0,
            threshold: 1.01,
            stride: 10,
            ess_target: 300.0,
            ess_at: 5000,
            dims: vec![2, 8, 32, 128],
            steps: 20_000,
            count: 50,
            min_states: 3,
            max_states: 10,
            m0: 10.0,
            eps: 0.1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => self.kind = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "n" => self.n = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "c_off" => self.c_off = parse(key, value)?,
            "noise_location" => self.noise_location = parse(key, value)?,
            "noise_scale" => self.noise_scale = parse(key, value)?,
            "theta_star" => self.theta_star = Some(parse_list(key, value)?),
            "tau" => self.tau = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "prior_half_width" => self.prior_half_width = parse(key, value)?,
            "samplers" => self.samplers = parse_list(key, value)?,
            "c0" => self.c0 = if value == "auto" { None } else { Some(parse(key, value)?) },
            "warmup" => self.warmup = parse(key, value)?,
            "warmness" => self.warmness = parse(key, value)?,
            "tolerance" => self.tolerance = parse(key, value)?,
            "chains" => self.chains = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "spread" => self.spread = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "ess_target" => self.ess_target = parse(key, value)?,
            "ess_at" => self.ess_at = parse(key, value)?,
            "dims" => self.dims = parse_list(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "count" => self.count = parse(key, value)?,
            "min_states" => self.min_states = parse(key, value)?,
            "max_states" => self.max_states = parse(key, value)?,
            "m0" => self.m0 = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            _ => match key.strip_prefix("c0.") {
                Some(name) => {
                    self.c0_per_sampler.insert(name.parse()?, parse(key, value)?);
                }
                None => return Err(Error::Parse(format!("unknown key `{key}`"))),
            },
        }
        Ok(())
    }

    /// `c₀` for a sampler, `None` meaning auto-tune.
    pub fn c0_for(&self, s: SamplerChoice) -> Option<f64> {
        self.c0_per_sampler.get(&s).copied().or(self.c0)
    }

    pub fn theta_star(&self) -> Vec<f64> {
        self.theta_star.clone().unwrap_or_else(|| (1..=self.d).map(|i| i as f64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n == 0 || self.d == 0 {
            return bad("n and d must be at least 1".into());
        }
        if self.chains < 2 {
            return bad("diagnostics need at least two chains".into());
        }
        let lower = if self.d > 1 { -1.0 / (self.d as f64 - 1.0) } else { -1.0 };
        if !(self.c_off > lower && self.c_off < 1.0) {
            return bad(format!("c_off = {} leaves the covariance indefinite", self.c_off));
        }
        if self.theta_star().len() != self.d {
            return bad("theta_star length differs from d".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)".into());
        }
        if !(self.noise_scale > 0.0 && self.learning_rate > 0.0 && self.prior_half_width > 0.0 && self.spread >= 0.0) {
            return bad("scales must be positive".into());
        }
        if self.c0.is_some_and(|c| !(c > 0.0)) || self.c0_per_sampler.values().any(|&c| !(c > 0.0)) {
            return bad("c0 must be positive".into());
        }
        if self.max_iters < 10 || self.steps < 10 {
            return bad("max_iters and steps must be at least 10".into());
        }
        if !(self.threshold > 1.0) || self.stride == 0 {
            return bad("threshold must exceed 1 and stride must be positive".into());
        }
        if self.samplers.is_empty() {
            return bad("no samplers selected".into());
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) || self.dims.contains(&0) {
            return bad("dims must be positive and strictly increasing".into());
        }
        if !(self.min_states >= 2 && self.min_states <= self.max_states && self.max_states <= 15) {
            return bad("conductance sizes must satisfy 2 ≤ min ≤ max ≤ 15".into());
        }
        Ok(())
    }
}
