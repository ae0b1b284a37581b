//! Experiment plumbing: the mission loop, fixed-policy sweeps, the
//! transition micro-benchmark and metrics output.

mod experiment;
pub mod microbench;
pub mod sweep;

pub use experiment::{
    run_experiment, run_with_controller, write_csv, Controller, Decision, ExperimentConfig,
    ExperimentResult, MissionRecord, PolicyMode, SessionSummary,
};
pub use sweep::{sweep_fixed_k, SweepResult};
