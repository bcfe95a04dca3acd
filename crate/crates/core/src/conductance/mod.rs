//! Finite-state laboratory: ergodic flow, (s-)conductance profiles,
//! χ² mixing times and a checker for the profile-based mixing bound.
//!
//! Subsets of states are `u64` bitmasks, bit `i` standing for state `i`.

mod chain;
mod discretize;
mod mixing;
mod profile;

pub use chain::{random_reversible_lazy_chain, DiscreteChain};
pub use discretize::discretize_mala;
pub use mixing::{
    chi2_divergence, chi2_mixing_time, verify_mixing_bound, worst_warm_start, MixingBoundCheck, MAX_CHI2_STEPS,
    MIN_LAZINESS,
};
pub use profile::{
    conductance, ergodic_flow, s_conductance_profile, write_profile_csv, ProfilePoint, SubsetTable, MAX_PROFILE_STATES,
};
