//! `flexkv` is an embedded LSM-tree key-value engine whose levels can each run
//! their own compaction policy, together with the machinery needed to retune
//! those policies online.
//!
//! The crate is organised as follows:
//!
//! - [`engine`]: the flexible LSM-tree ([`FlsmTree`]) with a memory buffer,
//!   geometric levels, variable-sized runs and deterministic simulated I/O.
//! - [`filter`]: Bloom filters, fence pointers and per-level FPR schedules.
//! - [`transition`]: greedy, lazy and flexible compaction-policy transitions.
//! - [`analysis`]: closed-form transition and per-level cost model, plus
//!   cross-level policy propagation.
//! - [`tuner`]: per-level DDPG actor-critic tuner and the threshold heuristic.
//! - [`workload`]: deterministic mission/session workload generation.
//! - [`stats`]: per-mission, per-level statistics collection.
//! - [`harness`]: experiment runner, fixed-policy sweeps, transition
//!   micro-benchmark and the cost table printer.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod filter;
pub mod harness;
pub mod stats;
pub mod transition;
pub mod tuner;
pub mod workload;

pub use engine::{CostModelParams, EngineConfig, EngineSnapshot, FlsmTree};
pub use error::{Error, Result};
pub use transition::{TransitionKind, TransitionRequest};
