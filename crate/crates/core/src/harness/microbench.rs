//! Transition micro-benchmarks.
//!
//! [`transition_microbench`] streams a balanced workload and switches every
//! level from one policy to another at the midpoint mission.
//! [`flexible_extra_reads`] isolates a single level, applies a flexible
//! transition at a chosen fill and counts the lookup reads it costs compared
//! with a tree that used the new policy from the start.

use serde::Serialize;

use super::experiment::{run_with_controller, Controller, Decision, ExperimentConfig, PolicyMode};
use crate::analysis::{additional_cost_flexible_with, FlexibleFormula, TransitionCostInput};
use crate::engine::{BloomScheme, EngineConfig, FlsmTree};
use crate::error::{Error, Result};
use crate::filter::FprScheme;
use crate::stats::MissionStats;
use crate::transition::{TransitionKind, TransitionRequest};
use crate::workload::{encode_key, encode_value, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicrobenchConfig {
    pub engine: EngineConfig,
    pub missions: usize,
    pub mission_size: usize,
    pub preload: usize,
    pub key_space: u64,
    pub gamma: f64,
    pub from_policy: usize,
    pub to_policy: usize,
    pub seed: u64,
}

impl Default for MicrobenchConfig {
    fn default() -> Self {
        MicrobenchConfig {
            engine: EngineConfig::default(),
            missions: 60,
            mission_size: 10_000,
            preload: 200_000,
            key_space: 1_000_000,
            gamma: 0.5,
            from_policy: 1,
            to_policy: 10,
            seed: 0,
        }
    }
}

impl MicrobenchConfig {
    /// Index of the first mission run under the new policy.
    pub fn transition_mission(&self) -> usize {
        self.missions / 2
    }
}

/// Simulated time of one mission split into its lookup part and the rest
/// (updates, flushes, compactions and transition work).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicrobenchMission {
    pub mission: usize,
    pub read_time: f64,
    pub write_time: f64,
    pub t_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicrobenchResult {
    pub kind: TransitionKind,
    pub transition_mission: usize,
    pub series: Vec<MicrobenchMission>,
}

impl MicrobenchResult {
    pub fn total(&self) -> f64 {
        self.series.iter().map(|m| m.t_prime).sum()
    }

    /// Mean write time of the missions before the transition.
    pub fn trailing_write_average(&self) -> f64 {
        let before = &self.series[..self.transition_mission];
        before.iter().map(|m| m.write_time).sum::<f64>() / before.len().max(1) as f64
    }

    pub fn transition_write_time(&self) -> f64 {
        self.series[self.transition_mission].write_time
    }

    /// Write time of the transition mission over the trailing average.
    pub fn spike_ratio(&self) -> f64 {
        self.transition_write_time() / self.trailing_write_average()
    }
}

/// Moves every level to `to` with `kind` right before mission `at`.
struct ScheduledTransition {
    at: usize,
    to: usize,
    kind: TransitionKind,
    seen: usize,
}

impl Controller for ScheduledTransition {
    fn end_of_mission(&mut self, _: &MissionStats, tree: &mut FlsmTree) -> Result<Decision> {
        self.seen += 1;
        if self.seen != self.at {
            return Ok(Decision::default());
        }
        for level in (1..=tree.level_count()).rev() {
            tree.apply_transition(TransitionRequest {
                level,
                new_policy: self.to,
                kind: self.kind,
            })?;
        }
        tree.set_default_policy(self.to)?;
        Ok(Decision {
            reward: None,
            action: format!("all:{}->{}", self.kind, self.to),
        })
    }
}

pub fn transition_microbench(kind: TransitionKind, cfg: &MicrobenchConfig) -> Result<MicrobenchResult> {
    if cfg.missions < 2 {
        return Err(Error::InvalidConfig("microbench needs at least two missions".into()));
    }
    let exp = ExperimentConfig {
        engine: EngineConfig {
            initial_policy: cfg.from_policy,
            ..cfg.engine.clone()
        },
        workload: WorkloadSpec::static_workload(cfg.gamma, cfg.missions, cfg.mission_size)
            .with_preload(cfg.preload)
            .with_key_space(cfg.key_space),
        policy: PolicyMode::Fixed { k: cfg.from_policy },
        transition: kind,
        seed: cfg.seed,
        record_wall_time: false,
    };
    exp.validate()?;
    cfg.engine.check_policy(cfg.to_policy)?;
    let at = cfg.transition_mission();
    let mut ctl = ScheduledTransition {
        at,
        to: cfg.to_policy,
        kind,
        seen: 0,
    };
    let result = run_with_controller(&exp, &mut ctl)?;
    let series = result
        .records
        .iter()
        .map(|r| {
            let read_time = r.lookup_time;
            MicrobenchMission {
                mission: r.mission,
                read_time,
                write_time: r.t_prime - read_time,
                t_prime: r.t_prime,
            }
        })
        .collect();
    Ok(MicrobenchResult {
        kind,
        transition_mission: at,
        series,
    })
}

/// Setup of the single-level flexible transition measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtraReadsConfig {
    /// Size ratio of the isolated level; chosen so that every fill point
    /// and both run capacities are whole numbers of buffers.
    pub size_ratio: usize,
    pub buffer_entries: u64,
    pub key_width: usize,
    pub value_width: usize,
    pub bits_per_key: f64,
    pub old_policy: usize,
    pub new_policy: usize,
    pub fill: f64,
    pub gamma: f64,
}

impl Default for ExtraReadsConfig {
    fn default() -> Self {
        ExtraReadsConfig {
            size_ratio: 60,
            buffer_entries: 200,
            key_width: 16,
            value_width: 16,
            bits_per_key: 6.0,
            old_policy: 5,
            new_policy: 3,
            fill: 0.5,
            gamma: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtraReadsMeasurement {
    /// Fill at the moment of the transition, as realised.
    pub fill: f64,
    pub flexible_reads: u64,
    pub reference_reads: u64,
    pub lookups: u64,
    pub updates: u64,
    /// Model input describing this setup.
    pub input: TransitionCostInput,
}

impl ExtraReadsMeasurement {
    pub fn measured_extra(&self) -> f64 {
        self.flexible_reads as f64 - self.reference_reads as f64
    }

    pub fn predicted(&self, formula: FlexibleFormula) -> f64 {
        additional_cost_flexible_with(&self.input, formula).expect("input built valid")
    }
}

/// Runs the same operation stream through a tree that switches from
/// `old_policy` to `new_policy` by a flexible transition at `fill`, and a
/// reference tree born with `new_policy`. Lookups all miss; updates use
/// fresh keys. Lookup page reads are counted from the transition until the
/// level fills.
pub fn flexible_extra_reads(cfg: &ExtraReadsConfig, seed: u64) -> Result<ExtraReadsMeasurement> {
    use rand::distr::{Bernoulli, Distribution};
    use rand::SeedableRng;

    let entry = (cfg.key_width + cfg.value_width + crate::engine::SEQUENCE_WIDTH) as u64;
    let engine = EngineConfig {
        size_ratio: cfg.size_ratio,
        buffer_capacity: cfg.buffer_entries * entry,
        key_width: cfg.key_width,
        value_width: cfg.value_width,
        page_size: 4096.max(entry),
        max_levels: 2,
        bloom: BloomScheme::Uniform {
            bits_per_key: cfg.bits_per_key,
        },
        initial_policy: cfg.old_policy,
        ..Default::default()
    };
    let mut flexible = FlsmTree::new(engine.clone())?;
    let mut reference = FlsmTree::new(EngineConfig {
        initial_policy: cfg.new_policy,
        ..engine.clone()
    })?;
    let total_flushes = cfg.size_ratio as u64;
    let switch_at = (cfg.fill * total_flushes as f64).round() as u64;
    if switch_at == 0 || switch_at >= total_flushes {
        return Err(Error::InvalidConfig(format!(
            "fill {} leaves no room before or after the transition",
            cfg.fill
        )));
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let is_lookup = Bernoulli::new(cfg.gamma)
        .map_err(|e| Error::InvalidConfig(format!("gamma: {e}")))?;
    let miss_base = 1u64 << 40;
    let mut next_key = 0u64;
    let (mut lookups, mut updates) = (0u64, 0u64);
    let (mut flex_reads, mut ref_reads) = (0u64, 0u64);
    let mut switched = false;
    let mut realised_fill = 0.0;

    while flexible.flush_count() < total_flushes {
        if !switched && flexible.flush_count() == switch_at {
            realised_fill = flexible.level(1).map_or(0.0, |l| l.fill_ratio());
            flexible.apply_flexible(1, cfg.new_policy)?;
            switched = true;
        }
        if is_lookup.sample(&mut rng) {
            let key = encode_key(miss_base + rand::Rng::random_range(&mut rng, 0..miss_base), cfg.key_width);
            let (f0, r0) = (flexible.io_counters().read_pages, reference.io_counters().read_pages);
            flexible.get(&key)?;
            reference.get(&key)?;
            if switched {
                lookups += 1;
                flex_reads += flexible.io_counters().read_pages - f0;
                ref_reads += reference.io_counters().read_pages - r0;
            }
        } else {
            let key = encode_key(next_key, cfg.key_width);
            let value = encode_value(next_key, cfg.value_width);
            next_key += 1;
            flexible.put(&key, &value)?;
            reference.put(&key, &value)?;
            if switched {
                updates += 1;
            }
        }
    }

    let fpr = engine.fpr_schedule().level_fpr(1);
    debug_assert_eq!(engine.fpr_schedule().scheme, FprScheme::Uniform);
    let input = TransitionCostInput {
        size_ratio: cfg.size_ratio as f64,
        capacity: engine.level_capacity(1) as f64,
        page_size: engine.page_size as f64,
        entry_size: entry as f64,
        old_policy: cfg.old_policy as f64,
        new_policy: cfg.new_policy as f64,
        fill: realised_fill,
        fpr,
        gamma: cfg.gamma,
        updates_per_sec: 0.0,
    };
    Ok(ExtraReadsMeasurement {
        fill: realised_fill,
        flexible_reads: flex_reads,
        reference_reads: ref_reads,
        lookups,
        updates,
        input,
    })
}
