//! End-to-end studies: the quantile-regression comparison of MRW, MALA and
//! preconditioned MALA, a dimension-scaling study of the MALA step size, and
//! batches of finite-chain mixing-bound checks.

mod batch;
mod config;
mod quantile;
mod scaling;

pub use batch::{run_conductance_batch, verify_batch, write_batch_csv, BatchRow};
pub use config::{ExperimentConfig, ExperimentKind, SamplerChoice};
pub use quantile::{
    generate_quantile_data, overdispersed_starts, run_quantile_experiment, sample_quantile_posterior,
    write_quantile_outputs, QuantileReport, SamplerSummary,
};
pub use scaling::{run_scaling_study, scaling_chain, write_scaling_csv, ScalingRow, StepRule};
