use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::proposal::{acceptance_from_parts, propose, ProposalSpec};
use super::rng::{chain_rng, ChainRng};
use crate::error::{Error, Result};
use crate::targets::TargetDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Accepted,
    Rejected,
    LazyHold,
}

impl Event {
    pub fn code(self) -> char {
        match self {
            Event::Accepted => 'A',
            Event::Rejected => 'R',
            Event::LazyHold => 'L',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        match c {
            "A" => Some(Event::Accepted),
            "R" => Some(Event::Rejected),
            "L" => Some(Event::LazyHold),
            _ => None,
        }
    }
}

/// Current position with its cached potential and subgradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: DVector<f64>,
    pub potential: f64,
    pub subgrad: DVector<f64>,
    pub iteration: u64,
}

impl ChainState {
    pub fn new(target: &dyn TargetDensity, position: DVector<f64>) -> Result<Self> {
        if position.len() != target.dim() {
            return Err(Error::InvalidInput(format!(
                "initial point has dimension {}, target has {}",
                position.len(),
                target.dim()
            )));
        }
        let (potential, subgrad) = target.potential_and_subgrad(&position);
        if !potential.is_finite() {
            return Err(Error::InvalidState(format!("U(init) = {potential}")));
        }
        Ok(Self { position, potential, subgrad, iteration: 0 })
    }
}

/// One ζ-lazy Metropolis–Hastings transition.
///
/// Draw order is fixed: one uniform for the lazy coin, then `d` standard
/// normals for the proposal, then one uniform for the accept test.
pub fn step<R: Rng + ?Sized>(
    state: &ChainState,
    spec: &ProposalSpec,
    target: &dyn TargetDensity,
    rng: &mut R,
) -> Result<(ChainState, Event)> {
    if !state.potential.is_finite() {
        return Err(Error::InvalidState(format!("U(x) = {}", state.potential)));
    }
    let lazy_u: f64 = rng.random();
    if lazy_u < spec.lazy() {
        let mut next = state.clone();
        next.iteration += 1;
        return Ok((next, Event::LazyHold));
    }
    let y = propose(spec, &state.position, &state.subgrad, rng);
    let (uy, gy) = target.potential_and_subgrad(&y);
    let a = acceptance_from_parts(spec, &state.position, state.potential, &state.subgrad, &y, uy, &gy);
    let u: f64 = rng.random();
    if a > 0.0 && u <= a {
        Ok((ChainState { position: y, potential: uy, subgrad: gy, iteration: state.iteration + 1 }, Event::Accepted))
    } else {
        let mut next = state.clone();
        next.iteration += 1;
        Ok((next, Event::Rejected))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub n_steps: usize,
    pub thin: usize,
    pub seed: u64,
    pub chain_id: u64,
}

impl RunOptions {
    pub fn new(n_steps: usize, seed: u64) -> Self {
        Self { n_steps, thin: 1, seed, chain_id: 0 }
    }
}

/// Output of one chain: every `thin`-th state after the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub chain_id: u64,
    pub seed: u64,
    /// Iteration index (1-based) of each recorded row.
    pub steps: Vec<u64>,
    /// `K x d`, one recorded state per row.
    pub samples: DMatrix<f64>,
    pub events: Vec<Event>,
    /// Accepted steps over non-lazy steps, counted over every iteration.
    pub acceptance_rate: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.samples.column(j).iter().copied().collect()
    }

    pub fn event_count(&self, event: Event) -> usize {
        self.events.iter().filter(|e| **e == event).count()
    }
}

/// A chain that can be advanced in pieces; advancing by `a` then `b` steps
/// gives the same trace as one run of `a + b` steps.
pub struct ChainRunner<'a> {
    target: &'a dyn TargetDensity,
    spec: &'a ProposalSpec,
    state: ChainState,
    rng: ChainRng,
    thin: usize,
    chain_id: u64,
    seed: u64,
    iteration: usize,
    rows: Vec<f64>,
    steps: Vec<u64>,
    events: Vec<Event>,
    accepted: usize,
    moves: usize,
}

impl<'a> ChainRunner<'a> {
    /// `opts.n_steps` is ignored.
    pub fn new(
        target: &'a dyn TargetDensity,
        spec: &'a ProposalSpec,
        init: &DVector<f64>,
        opts: RunOptions,
    ) -> Result<Self> {
        if opts.thin == 0 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        if spec.dim() != target.dim() {
            return Err(Error::InvalidInput("proposal and target dimensions differ".into()));
        }
        Ok(Self {
            target,
            spec,
            state: ChainState::new(target, init.clone())?,
            rng: chain_rng(opts.seed, opts.chain_id),
            thin: opts.thin,
            chain_id: opts.chain_id,
            seed: opts.seed,
            iteration: 0,
            rows: Vec::new(),
            steps: Vec::new(),
            events: Vec::new(),
            accepted: 0,
            moves: 0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iteration
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn advance(&mut self, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            let (next, event) = step(&self.state, self.spec, self.target, &mut self.rng)?;
            match event {
                Event::Accepted => {
                    self.accepted += 1;
                    self.moves += 1;
                }
                Event::Rejected => self.moves += 1,
                Event::LazyHold => {}
            }
            self.state = next;
            self.iteration += 1;
            if self.iteration.is_multiple_of(self.thin) {
                self.rows.extend(self.state.position.iter().copied());
                self.steps.push(self.iteration as u64);
                self.events.push(event);
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> Trace {
        let d = self.target.dim();
        let acceptance_rate = if self.moves == 0 { 0.0 } else { self.accepted as f64 / self.moves as f64 };
        Trace {
            chain_id: self.chain_id,
            seed: self.seed,
            steps: self.steps.clone(),
            samples: DMatrix::from_row_slice(self.steps.len(), d, &self.rows),
            events: self.events.clone(),
            acceptance_rate,
        }
    }
}

/// Runs one chain from `init`. Deterministic in `(seed, chain_id)`.
pub fn run_chain(
    target: &dyn TargetDensity,
    spec: &ProposalSpec,
    init: &DVector<f64>,
    opts: RunOptions,
) -> Result<Trace> {
    if opts.n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    let mut runner = ChainRunner::new(target, spec, init, opts)?;
    runner.advance(opts.n_steps)?;
    Ok(runner.trace())
}

/// Runs one chain per initial point in parallel; chain `i` uses stream `i` of `seed`.
pub fn run_chains(
    target: &dyn TargetDensity,
    spec: &ProposalSpec,
    inits: &[DVector<f64>],
    n_steps: usize,
    thin: usize,
    seed: u64,
) -> Result<Vec<Trace>> {
    inits
        .par_iter()
        .enumerate()
        .map(|(i, init)| run_chain(target, spec, init, RunOptions { n_steps, thin, seed, chain_id: i as u64 }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::chain_rng;
    use crate::targets::GaussianTarget;
    use nalgebra::dvector;

    #[test]
    fn single_step_trace() {
        let t = GaussianTarget::standard(2);
        let spec = ProposalSpec::mala(0.2, 2).unwrap();
        let tr = run_chain(&t, &spec, &dvector![0.0, 0.0], RunOptions::new(1, 3)).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.steps, vec![1]);
    }

    #[test]
    fn deterministic_given_seed() {
        let t = GaussianTarget::standard(3);
        let spec = ProposalSpec::mala(0.3, 3).unwrap().with_lazy(0.2).unwrap();
        let init = dvector![1.0, -1.0, 0.5];
        let a = run_chain(&t, &spec, &init, RunOptions::new(500, 11)).unwrap();
        let b = run_chain(&t, &spec, &init, RunOptions::new(500, 11)).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&t, &spec, &init, RunOptions::new(500, 12)).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn held_states_repeat_and_rate_is_consistent() {
        let t = GaussianTarget::standard(2);
        let spec = ProposalSpec::mala(1.5, 2).unwrap().with_lazy(0.3).unwrap();
        let tr = run_chain(&t, &spec, &dvector![2.0, 2.0], RunOptions::new(2000, 5)).unwrap();
        for k in 1..tr.len() {
            if tr.events[k] != Event::Accepted {
                assert_eq!(tr.samples.row(k), tr.samples.row(k - 1));
            }
        }
        let acc = tr.event_count(Event::Accepted) as f64;
        let moves = (tr.len() - tr.event_count(Event::LazyHold)) as f64;
        assert_eq!(tr.acceptance_rate, acc / moves);
    }

    #[test]
    fn thinning_records_every_kth() {
        let t = GaussianTarget::standard(1);
        let spec = ProposalSpec::mala(0.5, 1).unwrap();
        let full = run_chain(&t, &spec, &dvector![0.0], RunOptions::new(100, 9)).unwrap();
        let thin =
            run_chain(&t, &spec, &dvector![0.0], RunOptions { n_steps: 100, thin: 10, seed: 9, chain_id: 0 }).unwrap();
        assert_eq!(thin.len(), 10);
        for (i, s) in thin.steps.iter().enumerate() {
            assert_eq!(thin.samples[(i, 0)], full.samples[(*s as usize - 1, 0)]);
        }
        assert_eq!(thin.acceptance_rate, full.acceptance_rate);
    }

    #[test]
    fn certain_acceptance_downhill_symmetric() {
        // MRW into strictly lower potential: A = 1, so the event is accepted whatever u is
        let t = GaussianTarget::standard(1);
        let spec = ProposalSpec::mrw(1e-6, 1).unwrap();
        let state = ChainState::new(&t, dvector![5.0]).unwrap();
        let mut rng = chain_rng(1, 0);
        let mut accepted = 0;
        let mut s = state;
        for _ in 0..50 {
            let before = s.position[0];
            let (next, ev) = step(&s, &spec, &t, &mut rng).unwrap();
            if next.position[0].abs() < before.abs() {
                assert_eq!(ev, Event::Accepted);
                accepted += 1;
            }
            s = next;
        }
        assert!(accepted > 0);
    }

    #[test]
    fn lazy_fraction_concentrates() {
        let t = GaussianTarget::standard(1);
        let spec = ProposalSpec::mala(0.5, 1).unwrap().with_lazy(0.5).unwrap();
        let k = 100_000;
        let tr = run_chain(&t, &spec, &dvector![0.0], RunOptions::new(k, 21)).unwrap();
        let frac = tr.event_count(Event::LazyHold) as f64 / k as f64;
        assert!((frac - 0.5).abs() <= 0.01, "lazy fraction {frac}");
    }

    #[test]
    fn invalid_init_rejected() {
        use crate::targets::{gibbs_potential, Dataset, GibbsSpec, Prior, SquaredLoss};
        use std::sync::Arc;
        let ds = Arc::new(Dataset::from_rows(1, 1, vec![1.0], vec![0.0]).unwrap());
        let u = gibbs_potential(
            GibbsSpec::new(ds, Arc::new(SquaredLoss), 1.0, Prior::symmetric_box(1, 1.0).unwrap()).unwrap(),
        )
        .unwrap();
        let spec = ProposalSpec::mala(0.1, 1).unwrap();
        assert!(matches!(run_chain(&u, &spec, &dvector![3.0], RunOptions::new(10, 0)), Err(Error::InvalidState(_))));
        assert!(run_chain(&u, &spec, &dvector![0.0], RunOptions::new(0, 0)).is_err());
    }
}
