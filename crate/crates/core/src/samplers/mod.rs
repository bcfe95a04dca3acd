//! Metropolis-adjusted Langevin (optionally preconditioned, with subgradients)
//! and Metropolis random walk kernels, the ζ-lazy Metropolis–Hastings loop,
//! step-size selection and warm starts.

mod chain;
mod proposal;
mod rng;
mod step_size;
mod trace_io;
mod tune;
mod warm;

pub use chain::{run_chain, run_chains, step, ChainRunner, ChainState, Event, RunOptions, Trace};
pub use proposal::{acceptance, log_q, propose, propose_with_noise, Preconditioner, ProposalSpec, SamplerKind};
pub use rng::{chain_rng, ChainRng};
pub use step_size::{mala_step_size, StepSizeInputs};
pub use trace_io::{read_trace_csv, write_metadata, write_trace_csv};
pub use tune::{tune_step, TuneConfig, TuneResult};
pub use warm::{warm_bound, warm_start_sample, WarmBound, WarmBoundOptions, WarmStartSpec};
