//! Scoring, the random-simplex baseline, and the reproducible Monte-Carlo harness.

mod baseline;
mod harness;
mod metrics;

pub use baseline::{random_baseline, BaselineStats};
pub use harness::{run_experiment, ExperimentConfig, ExperimentReport, RepOutcome, Sampler};
pub use metrics::{matched_l1_error, MAX_MATCHED_COMPONENTS};
