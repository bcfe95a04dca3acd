//! Convergence diagnostics: Gelman–Rubin shrink factors, effective sample
//! size and moment errors against known targets.
//!
//! All functions take the full chain, holds and rejections included.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::samplers::Trace;

/// Upper quantile level used for the shrink-factor bound.
pub const UPPER_QUANTILE: f64 = 0.975;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Plain `√(((n−1)/n·W + B/n)/W)` over whole chains: no burn-in, no
/// degrees-of-freedom correction.
pub fn psrf_raw(chains: &[&[f64]]) -> Result<f64> {
    check_chains(chains, 2)?;
    let n = chains[0].len() as f64;
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    if w <= 0.0 {
        return Err(Error::DegenerateChains("within-chain variance is zero".into()));
    }
    let b_over_n = var(&chains.iter().map(|c| mean(c)).collect::<Vec<_>>());
    Ok((((n - 1.0) / n * w + b_over_n) / w).sqrt())
}

fn check_chains(chains: &[&[f64]], min_len: usize) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput("need at least two chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("chains have different lengths".into()));
    }
    if n < min_len {
        return Err(Error::InvalidInput(format!("chains shorter than {min_len}")));
    }
    Ok(())
}

fn upper_f_quantile(df1: f64, df2: f64) -> Result<f64> {
    if df2.is_finite() {
        let f = FisherSnedecor::new(df1, df2).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(f.inverse_cdf(UPPER_QUANTILE))
    } else {
        let c = ChiSquared::new(df1).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(c.inverse_cdf(UPPER_QUANTILE) / df1)
    }
}

/// Shrink factor of the given samples (already trimmed), with the
/// Brooks–Gelman correction. Returns `(point, upper)`.
fn shrink_factor(chains: &[&[f64]]) -> Result<(f64, f64)> {
    let s2: Vec<f64> = chains.iter().map(|c| var(c)).collect();
    let xbar: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    shrink_from_moments(&s2, &xbar, chains[0].len() as f64)
}

/// Per-chain sample variances `s2` and means `xbar` of windows of length `n`.
fn shrink_from_moments(s2: &[f64], xbar: &[f64], n: f64) -> Result<(f64, f64)> {
    let m = s2.len() as f64;
    let w = mean(s2);
    if !(w > 0.0) {
        return Err(Error::DegenerateChains("within-chain variance is zero".into()));
    }
    let b = n * var(xbar);
    let muhat = mean(xbar);
    let xbar2: Vec<f64> = xbar.iter().map(|v| v * v).collect();

    let var_w = var(s2) / m;
    let var_b = 2.0 * b * b / (m - 1.0);
    let cov_wb = (n / m) * (cov(s2, &xbar2) - 2.0 * muhat * cov(s2, xbar));
    let v = (n - 1.0) * w / n + (1.0 + 1.0 / m) * b / n;
    let var_v =
        ((n - 1.0).powi(2) * var_w + (1.0 + 1.0 / m).powi(2) * var_b + 2.0 * (n - 1.0) * (1.0 + 1.0 / m) * cov_wb)
            / (n * n);
    let df_adj = if var_v > 0.0 {
        let df_v = 2.0 * v * v / var_v;
        (df_v + 3.0) / (df_v + 1.0)
    } else {
        1.0
    };
    let w_df = if var_w > 0.0 { 2.0 * w * w / var_w } else { f64::INFINITY };
    let r2_fixed = (n - 1.0) / n;
    let r2_random = (1.0 + 1.0 / m) * (1.0 / n) * (b / w);
    let q = upper_f_quantile(m - 1.0, w_df)?;
    Ok(((df_adj * (r2_fixed + r2_random)).sqrt(), (df_adj * (r2_fixed + q * r2_random)).sqrt()))
}

/// Running sums of each chain (shifted by its first value) so window
/// means and variances cost `O(m)`.
struct RunningSums {
    shift: Vec<f64>,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
}

impl RunningSums {
    fn new(chains: &[&[f64]]) -> Self {
        let mut shift = Vec::with_capacity(chains.len());
        let mut sum = Vec::with_capacity(chains.len());
        let mut sum_sq = Vec::with_capacity(chains.len());
        for c in chains {
            let s0 = c.first().copied().unwrap_or(0.0);
            let (mut a, mut b) = (0.0, 0.0);
            let mut cs = Vec::with_capacity(c.len() + 1);
            let mut cq = Vec::with_capacity(c.len() + 1);
            cs.push(0.0);
            cq.push(0.0);
            for x in c.iter() {
                let y = x - s0;
                a += y;
                b += y * y;
                cs.push(a);
                cq.push(b);
            }
            shift.push(s0);
            sum.push(cs);
            sum_sq.push(cq);
        }
        Self { shift, sum, sum_sq }
    }

    /// Means and sample variances over `[a, b)`.
    fn window(&self, a: usize, b: usize) -> (Vec<f64>, Vec<f64>) {
        let n = (b - a) as f64;
        let mut means = Vec::with_capacity(self.shift.len());
        let mut vars = Vec::with_capacity(self.shift.len());
        for k in 0..self.shift.len() {
            let s = self.sum[k][b] - self.sum[k][a];
            let q = self.sum_sq[k][b] - self.sum_sq[k][a];
            let ss = q - s * s / n;
            // rounding can leave a tiny residue for a constant window
            let ss = if ss <= 1e-13 * q { 0.0 } else { ss };
            means.push(self.shift[k] + s / n);
            vars.push(ss / (n - 1.0));
        }
        (means, vars)
    }

    /// Shrink factor of the prefix of length `p`, second half kept.
    fn prefix_shrink(&self, p: usize) -> Result<(f64, f64)> {
        let keep = p / 2;
        let (xbar, s2) = self.window(p - keep, p);
        shrink_from_moments(&s2, &xbar, keep as f64)
    }
}

/// Shrink factor on the first `prefix_len` samples of each chain, after
/// discarding the first half of that prefix.
pub fn gelman_rubin_slices(chains: &[&[f64]], prefix_len: usize) -> Result<(f64, f64)> {
    check_chains(chains, prefix_len)?;
    if prefix_len < 4 {
        return Err(Error::InvalidInput("prefix length must be at least 4".into()));
    }
    let keep = prefix_len / 2;
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[prefix_len - keep..prefix_len]).collect();
    shrink_factor(&trimmed)
}

fn column(t: &Trace, coord: usize) -> &[f64] {
    let n = t.len();
    &t.samples.as_slice()[coord * n..(coord + 1) * n]
}

fn columns(chains: &[Trace], coord: usize) -> Result<Vec<&[f64]>> {
    chains
        .iter()
        .map(|t| {
            if coord >= t.dim() {
                return Err(Error::InvalidInput(format!("coordinate {coord} out of range")));
            }
            Ok(column(t, coord))
        })
        .collect()
}

/// `(point, upper)` shrink factor for one coordinate.
pub fn gelman_rubin(chains: &[Trace], coord: usize, prefix_len: usize) -> Result<(f64, f64)> {
    gelman_rubin_slices(&columns(chains, coord)?, prefix_len)
}

/// Evaluated prefix lengths: multiples of `stride` that are at least 4.
pub fn prefix_grid(len: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    (1..=len / stride).map(|k| k * stride).filter(|&p| p >= 4).collect()
}

/// Smallest evaluated prefix at which the upper shrink factor is below
/// `threshold` for every coordinate. `None` if that never happens.
pub fn iterations_to_threshold(chains: &[Trace], threshold: f64, stride: usize) -> Result<Option<usize>> {
    first_crossing_from(chains, threshold, stride, 0)
}

/// As [`iterations_to_threshold`], skipping prefixes shorter than `from`.
pub(crate) fn first_crossing_from(
    chains: &[Trace],
    threshold: f64,
    stride: usize,
    from: usize,
) -> Result<Option<usize>> {
    if !(threshold > 1.0) {
        return Err(Error::InvalidInput("threshold must exceed 1".into()));
    }
    let d = chains.first().map_or(0, Trace::dim);
    let sums = (0..d)
        .map(|j| {
            let c = columns(chains, j)?;
            check_chains(&c, 0)?;
            Ok(RunningSums::new(&c))
        })
        .collect::<Result<Vec<_>>>()?;
    for p in prefix_grid(chains[0].len(), stride).into_iter().filter(|&p| p >= from) {
        let mut below = true;
        for s in &sums {
            match s.prefix_shrink(p) {
                Ok((_, up)) if up < threshold => {}
                Ok(_) | Err(Error::DegenerateChains(_)) => {
                    below = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if below {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Effective sample size with Geyer's initial positive sequence.
pub fn ess_slice(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidInput("need at least 10 samples".into()));
    }
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let autocov = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let c0 = autocov(0);
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateChains("trace has zero variance".into()));
    }
    let max_lag = n / 2;
    let mut sum_gamma = 0.0;
    let mut k = 0;
    while 2 * k < max_lag {
        let gamma = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if gamma <= 0.0 {
            break;
        }
        sum_gamma += gamma;
        k += 1;
    }
    let tau = 2.0 * sum_gamma - 1.0;
    let ess = n as f64 / tau;
    Ok(if ess.is_finite() && ess > 0.0 { ess.min(n as f64) } else { n as f64 })
}

pub fn effective_sample_size(trace: &Trace, coord: usize) -> Result<f64> {
    if coord >= trace.dim() {
        return Err(Error::InvalidInput(format!("coordinate {coord} out of range")));
    }
    ess_slice(column(trace, coord))
}

/// Max-abs errors of the empirical mean and (1/N-normalised) covariance of
/// `samples` (rows are draws).
pub fn moment_discrepancy(
    samples: &DMatrix<f64>,
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let (n, d) = samples.shape();
    if n == 0 || mean.len() != d || covariance.shape() != (d, d) {
        return Err(Error::InvalidInput("moment shapes do not match the samples".into()));
    }
    let emp_mean: DVector<f64> = samples.row_mean().transpose();
    let centred = DMatrix::from_fn(n, d, |i, j| samples[(i, j)] - emp_mean[j]);
    let emp_cov = centred.transpose() * &centred / n as f64;
    Ok(((emp_mean - mean).amax(), (emp_cov - covariance).amax()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhatPoint {
    pub prefix_len: usize,
    pub coord: usize,
    pub point: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub rhat: Vec<RhatPoint>,
    /// Per coordinate, averaged over chains.
    pub ess: Vec<f64>,
    pub iters_to_threshold: Vec<Option<usize>>,
    pub iters_to_threshold_max: Option<usize>,
    pub moment_error: Option<(DVector<f64>, DMatrix<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub stride: usize,
    pub threshold: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { stride: 50, threshold: 1.01 }
    }
}

impl DiagnosticsReport {
    /// `known` = (mean, covariance) for the moment errors, computed on all
    /// chains pooled.
    pub fn compute(
        chains: &[Trace],
        opts: &ReportOptions,
        known: Option<(&DVector<f64>, &DMatrix<f64>)>,
    ) -> Result<Self> {
        let d = chains.first().ok_or_else(|| Error::InvalidInput("no chains".into()))?.dim();
        let len = chains[0].len();
        let mut rhat = Vec::new();
        let mut iters = Vec::with_capacity(d);
        let mut ess = Vec::with_capacity(d);
        for j in 0..d {
            let cols = columns(chains, j)?;
            check_chains(&cols, 0)?;
            let sums = RunningSums::new(&cols);
            let mut crossing = None;
            for p in prefix_grid(len, opts.stride) {
                match sums.prefix_shrink(p) {
                    Ok((point, upper)) => {
                        if crossing.is_none() && upper < opts.threshold {
                            crossing = Some(p);
                        }
                        rhat.push(RhatPoint { prefix_len: p, coord: j, point, upper });
                    }
                    Err(Error::DegenerateChains(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            iters.push(crossing);
            let per_chain = cols.iter().map(|c| ess_slice(c)).collect::<Result<Vec<_>>>()?;
            ess.push(mean(&per_chain));
        }
        let iters_max = if iters.iter().all(Option::is_some) {
            iterations_to_threshold(chains, opts.threshold, opts.stride)?
        } else {
            None
        };
        let moment_error = match known {
            Some((mu, sigma)) => {
                let rows: usize = chains.iter().map(Trace::len).sum();
                let mut pooled = DMatrix::zeros(rows, d);
                let mut r = 0;
                for t in chains {
                    pooled.rows_mut(r, t.len()).copy_from(&t.samples);
                    r += t.len();
                }
                let emp_mean: DVector<f64> = pooled.row_mean().transpose();
                let centred = DMatrix::from_fn(rows, d, |i, j| pooled[(i, j)] - emp_mean[j]);
                let emp_cov = centred.transpose() * &centred / rows as f64;
                Some((emp_mean - mu, emp_cov - sigma))
            }
            None => None,
        };
        Ok(Self { rhat, ess, iters_to_threshold: iters, iters_to_threshold_max: iters_max, moment_error })
    }

    /// `prefix_len,coord,rhat_point,rhat_upper`, coordinates 1-based.
    pub fn write_rhat_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "prefix_len,coord,rhat_point,rhat_upper")?;
        for r in &self.rhat {
            writeln!(w, "{},{},{},{}", r.prefix_len, r.coord + 1, r.point, r.upper)?;
        }
        Ok(())
    }

    /// `coord,ess`, coordinates 1-based.
    pub fn write_ess_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "coord,ess")?;
        for (j, e) in self.ess.iter().enumerate() {
            writeln!(w, "{},{}", j + 1, e)?;
        }
        Ok(())
    }
}
