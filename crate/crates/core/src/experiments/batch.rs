use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::conductance::{random_reversible_lazy_chain, verify_mixing_bound, DiscreteChain};
use crate::error::{Error, Result};
use crate::samplers::chain_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub index: usize,
    pub size: usize,
    pub tau_actual: Option<u64>,
    pub tau_bound: f64,
    pub holds: bool,
}

pub fn verify_batch(chains: &[DiscreteChain], m0: f64, eps: f64) -> Result<Vec<BatchRow>> {
    chains
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let r = verify_mixing_bound(c, m0, eps)?;
            Ok(BatchRow { index, size: c.size(), tau_actual: r.tau_actual, tau_bound: r.tau_bound, holds: r.holds })
        })
        .collect()
}

/// `count` seeded random reversible ½-lazy chains with sizes drawn
/// uniformly from `sizes`, each checked against the mixing bound.
pub fn run_conductance_batch(
    seed: u64,
    count: usize,
    sizes: (usize, usize),
    m0: f64,
    eps: f64,
) -> Result<Vec<BatchRow>> {
    let (lo, hi) = sizes;
    if !(2 <= lo && lo <= hi && hi <= 15) {
        return Err(Error::InvalidInput("sizes must satisfy 2 ≤ min ≤ max ≤ 15".into()));
    }
    let mut rng = chain_rng(seed, 0);
    let chains = (0..count)
        .map(|_| {
            let m = rng.random_range(lo..=hi);
            random_reversible_lazy_chain(&mut rng, m)
        })
        .collect::<Result<Vec<_>>>()?;
    verify_batch(&chains, m0, eps)
}

/// `chain,size,tau_actual,tau_bound,holds`; `NA` marks a chain that did
/// not mix and `inf` an infinite bound.
pub fn write_batch_csv<W: Write>(rows: &[BatchRow], mut w: W) -> Result<()> {
    writeln!(w, "chain,size,tau_actual,tau_bound,holds")?;
    for r in rows {
        let actual = r.tau_actual.map_or_else(|| "NA".to_string(), |t| t.to_string());
        writeln!(w, "{},{},{},{},{}", r.index, r.size, actual, r.tau_bound, r.holds)?;
    }
    Ok(())
}
