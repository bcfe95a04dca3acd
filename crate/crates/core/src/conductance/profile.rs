use std::io::Write;

use rayon::prelude::*;

use super::DiscreteChain;
use crate::error::{Error, Result};

pub const MAX_PROFILE_STATES: usize = 20;

/// Slack on the upper mass bound `π(S) ≤ v`, for masses that are `v` up to
/// summation rounding.
const MASS_SLACK: f64 = 1e-12;

fn flow_of(chain: &DiscreteChain, mask: u64) -> f64 {
    let m = chain.size();
    let (t, pi) = (chain.transition(), chain.stationary());
    let mut flow = 0.0;
    for i in (0..m).filter(|i| mask >> i & 1 == 1) {
        let out: f64 = (0..m).filter(|j| mask >> j & 1 == 0).map(|j| t[(i, j)]).sum();
        flow += pi[i] * out;
    }
    flow
}

fn mass_of(chain: &DiscreteChain, mask: u64) -> f64 {
    (0..chain.size()).filter(|i| mask >> i & 1 == 1).map(|i| chain.stationary()[i]).sum()
}

fn check_mask(chain: &DiscreteChain, mask: u64) -> Result<()> {
    let m = chain.size();
    if m >= 64 {
        return Err(Error::UnsupportedDimension { dim: m, max: 63 });
    }
    let full = (1u64 << m) - 1;
    if mask == 0 || mask & full == full || mask & !full != 0 {
        return Err(Error::InvalidInput("subset must be a proper nonempty subset of the states".into()));
    }
    Ok(())
}

/// `φ(S) = Σ_{i∈S} π_i Σ_{j∉S} T_ij`.
pub fn ergodic_flow(chain: &DiscreteChain, mask: u64) -> Result<f64> {
    check_mask(chain, mask)?;
    Ok(flow_of(chain, mask))
}

/// Mass and flow of every proper nonempty subset, sorted by mass.
#[derive(Debug, Clone)]
pub struct SubsetTable {
    /// `(π(S), φ(S), mask)`
    entries: Vec<(f64, f64, u64)>,
}

impl SubsetTable {
    pub fn new(chain: &DiscreteChain) -> Result<Self> {
        let m = chain.size();
        if m > MAX_PROFILE_STATES {
            return Err(Error::UnsupportedDimension { dim: m, max: MAX_PROFILE_STATES });
        }
        let full = (1u64 << m) - 1;
        let mut entries: Vec<(f64, f64, u64)> =
            (1..full).into_par_iter().map(|mask| (mass_of(chain, mask), flow_of(chain, mask), mask)).collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        Ok(Self { entries })
    }

    /// Subsets with `s < π(S) ≤ v` as `(mass, ratio, mask)`, ascending mass.
    fn window(&self, s: f64, v: f64) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.entries
            .iter()
            .filter(move |e| e.0 > s)
            .take_while(move |e| e.0 <= v + MASS_SLACK)
            .map(move |&(mass, flow, mask)| (mass, flow / (mass - s), mask))
    }

    /// `Φ_s(v)` and an argmin; `None` if no subset has mass in `(s, v]`.
    pub fn profile_at(&self, s: f64, v: f64) -> Option<(f64, u64)> {
        self.window(s, v).fold(None, |best: Option<(f64, u64)>, (_, r, mask)| match best {
            Some((b, _)) if b <= r => best,
            _ => Some((r, mask)),
        })
    }

    /// `v ↦ Φ_s(v)` on `(s, v_max]` as steps `(from_mass, value)`: the value
    /// holds on `[from_mass, next from_mass)`. Below the first step the
    /// feasible family is empty.
    pub fn profile_steps(&self, s: f64, v_max: f64) -> Vec<(f64, f64)> {
        let mut steps: Vec<(f64, f64)> = Vec::new();
        let mut best = f64::INFINITY;
        for (mass, r, _) in self.window(s, v_max) {
            if r < best {
                best = r;
                match steps.last_mut() {
                    Some(last) if last.0 == mass => last.1 = best,
                    _ => steps.push((mass, best)),
                }
            }
        }
        steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub s: f64,
    pub v: f64,
    /// `None` when no subset has mass in `(s, v]`.
    pub value: Option<f64>,
    pub argmin: Option<u64>,
}

/// Exact `Φ_s(v)` for each `v` in `v_grid` by enumerating all subsets.
pub fn s_conductance_profile(chain: &DiscreteChain, s: f64, v_grid: &[f64]) -> Result<Vec<ProfilePoint>> {
    if !(0.0..0.5).contains(&s) {
        return Err(Error::InvalidInput("s must lie in [0, 1/2)".into()));
    }
    if v_grid.iter().any(|&v| !(v > s && v <= 0.5)) {
        return Err(Error::InvalidInput("every v must lie in (s, 1/2]".into()));
    }
    let table = SubsetTable::new(chain)?;
    Ok(v_grid
        .iter()
        .map(|&v| {
            let best = table.profile_at(s, v);
            ProfilePoint { s, v, value: best.map(|b| b.0), argmin: best.map(|b| b.1) }
        })
        .collect())
}

/// Classical conductance `min φ(S)/π(S)` over `π(S) ≤ ½`.
pub fn conductance(chain: &DiscreteChain) -> Result<f64> {
    SubsetTable::new(chain)?
        .profile_at(0.0, 0.5)
        .map(|b| b.0)
        .ok_or_else(|| Error::InvalidInput("no subset has mass at most 1/2".into()))
}

/// `s,v,phi,argmin_bitmask`; undefined points are written as `NA`.
pub fn write_profile_csv<W: Write>(points: &[ProfilePoint], mut w: W) -> Result<()> {
    writeln!(w, "s,v,phi,argmin_bitmask")?;
    for p in points {
        match (p.value, p.argmin) {
            (Some(val), Some(mask)) => writeln!(w, "{},{},{},{}", p.s, p.v, val, mask)?,
            _ => writeln!(w, "{},{},NA,NA", p.s, p.v)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    fn two_state(p: f64) -> DiscreteChain {
        DiscreteChain::new(dmatrix![1.0 - p, p; p, 1.0 - p], dvector![0.5, 0.5]).unwrap()
    }

    #[test]
    fn two_state_flow_and_profile() {
        let c = two_state(0.3);
        assert!((ergodic_flow(&c, 0b01).unwrap() - 0.15).abs() < 1e-15);
        let pts = s_conductance_profile(&c, 0.0, &[0.5]).unwrap();
        assert!((pts[0].value.unwrap() - 0.3).abs() < 1e-15);
        let pts = s_conductance_profile(&c, 0.25, &[0.5]).unwrap();
        assert!((pts[0].value.unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn identity_chain_has_no_flow() {
        let c = DiscreteChain::new(DMatrix::identity(3, 3), DVector::from_element(3, 1.0 / 3.0)).unwrap();
        for mask in 1..7 {
            assert_eq!(ergodic_flow(&c, mask).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_trivial_subsets() {
        let c = two_state(0.3);
        assert!(ergodic_flow(&c, 0).is_err());
        assert!(ergodic_flow(&c, 0b11).is_err());
        assert!(ergodic_flow(&c, 0b100).is_err());
    }

    #[test]
    fn undefined_window() {
        let c = DiscreteChain::new(dmatrix![0.5, 0.5; 0.25, 0.75], dvector![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let pts = s_conductance_profile(&c, 0.0, &[0.2, 0.5]).unwrap();
        assert_eq!(pts[0].value, None);
        assert_eq!(pts[1].argmin, Some(0b01));
        let mut buf = Vec::new();
        write_profile_csv(&pts, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,v,phi,argmin_bitmask\n0,0.2,NA,NA\n0,0.5,0.5,1\n");
    }

    #[test]
    fn argument_checks() {
        let c = two_state(0.3);
        assert!(s_conductance_profile(&c, 0.3, &[0.2]).is_err());
        assert!(s_conductance_profile(&c, 0.0, &[0.6]).is_err());
        let big = DiscreteChain::new(DMatrix::identity(21, 21), DVector::from_element(21, 1.0 / 21.0));
        // rows of identity sum exactly; stationary sums within tolerance
        assert!(matches!(SubsetTable::new(&big.unwrap()), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn steps_match_pointwise_profile() {
        let t = dmatrix![0.5, 0.3, 0.2, 0.0; 0.3, 0.5, 0.1, 0.1; 0.2, 0.1, 0.6, 0.1; 0.0, 0.1, 0.1, 0.8];
        let c = DiscreteChain::new(t, DVector::from_element(4, 0.25)).unwrap();
        let table = SubsetTable::new(&c).unwrap();
        let steps = table.profile_steps(0.1, 0.5);
        for v in [0.25, 0.3, 0.5] {
            let stepped = steps.iter().rev().find(|s| s.0 <= v).map(|s| s.1);
            assert_eq!(stepped, table.profile_at(0.1, v).map(|b| b.0));
        }
    }
}
