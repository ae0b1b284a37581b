use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FprSchedule, FprScheme};

/// Width in bytes of the per-entry sequence number.
pub const SEQUENCE_WIDTH: usize = 8;

/// Time charged for each simulated operation, in abstract time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    /// Time per page read.
    pub read_io: f64,
    /// Time per page write.
    pub write_io: f64,
    /// CPU time per in-memory run probe (filter check).
    pub run_probe_cpu: f64,
    /// CPU time per entry pushed through a merge.
    pub compact_cpu_per_entry: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams {
            read_io: 1.0,
            write_io: 1.0,
            run_probe_cpu: 0.02,
            compact_cpu_per_entry: 0.001,
        }
    }
}

impl CostModelParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.read_io,
            self.write_io,
            self.run_probe_cpu,
            self.compact_cpu_per_entry,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "cost model parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Bloom filter memory allocation across levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum BloomScheme {
    /// Same bits per key on every level.
    Uniform { bits_per_key: f64 },
    /// Level 1 gets `bits_per_key_level1`; deeper levels get FPRs growing by
    /// a factor of `T` per level.
    Monkey { bits_per_key_level1: f64 },
}

impl Default for BloomScheme {
    fn default() -> Self {
        BloomScheme::Uniform { bits_per_key: 8.0 }
    }
}

impl BloomScheme {
    /// A Monkey allocation whose deepest level (`levels`) lands at the FPR of
    /// `bits_at_largest` bits per key.
    pub fn monkey_for_largest_level(bits_at_largest: f64, size_ratio: usize, levels: usize) -> Self {
        let largest = crate::filter::schedule_fpr_for_bits(bits_at_largest);
        let level1 = largest / (size_ratio as f64).powi(levels.saturating_sub(1) as i32);
        BloomScheme::Monkey {
            bits_per_key_level1: crate::filter::schedule_bits_for_fpr(level1),
        }
    }

    pub fn schedule(&self, size_ratio: usize) -> FprSchedule {
        match *self {
            BloomScheme::Uniform { bits_per_key } => FprSchedule {
                scheme: FprScheme::Uniform,
                level1_fpr: crate::filter::schedule_fpr_for_bits(bits_per_key),
                size_ratio,
            },
            BloomScheme::Monkey {
                bits_per_key_level1,
            } => FprSchedule {
                scheme: FprScheme::Monkey,
                level1_fpr: crate::filter::schedule_fpr_for_bits(bits_per_key_level1),
                size_ratio,
            },
        }
    }

    fn bits(&self) -> f64 {
        match *self {
            BloomScheme::Uniform { bits_per_key } => bits_per_key,
            BloomScheme::Monkey {
                bits_per_key_level1,
            } => bits_per_key_level1,
        }
    }
}

/// Static shape of an [`FlsmTree`](super::FlsmTree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Capacity ratio `T` between adjacent levels.
    pub size_ratio: usize,
    /// Memory buffer capacity in bytes; a multiple of the entry size.
    pub buffer_capacity: u64,
    pub key_width: usize,
    pub value_width: usize,
    /// Disk page size `B` in bytes.
    pub page_size: u64,
    /// Hard cap on the number of levels; the last level never compacts.
    pub max_levels: usize,
    pub bloom: BloomScheme,
    pub io_cost: CostModelParams,
    /// Policy given to every level when it is first materialized.
    pub initial_policy: usize,
    /// When set, every run is also written to this directory in the
    /// on-disk run format and removed once compacted away.
    pub persist_dir: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let key_width = 16;
        let value_width = 112;
        EngineConfig {
            size_ratio: 10,
            buffer_capacity: 500 * (key_width + value_width + SEQUENCE_WIDTH) as u64,
            key_width,
            value_width,
            page_size: 4096,
            max_levels: 7,
            bloom: BloomScheme::default(),
            io_cost: CostModelParams::default(),
            initial_policy: 1,
            persist_dir: None,
        }
    }
}

impl EngineConfig {
    /// Entry size `E`: key, value and sequence number.
    pub fn entry_size(&self) -> u64 {
        (self.key_width + self.value_width + SEQUENCE_WIDTH) as u64
    }

    pub fn entries_per_page(&self) -> u64 {
        self.page_size / self.entry_size()
    }

    /// Pages occupied by `entries` entries packed whole into pages.
    pub fn pages_for(&self, entries: usize) -> u64 {
        (entries as u64).div_ceil(self.entries_per_page())
    }

    pub fn buffer_entries(&self) -> u64 {
        self.buffer_capacity / self.entry_size()
    }

    /// Capacity `C_i` in bytes of 1-based `level`: `T^i` buffers.
    pub fn level_capacity(&self, level: usize) -> u64 {
        self.buffer_capacity * (self.size_ratio as u64).pow(level as u32)
    }

    pub fn fpr_schedule(&self) -> FprSchedule {
        self.bloom.schedule(self.size_ratio)
    }

    pub fn check_policy(&self, policy: usize) -> Result<()> {
        if (1..=self.size_ratio).contains(&policy) {
            Ok(())
        } else {
            Err(Error::PolicyOutOfRange {
                policy,
                size_ratio: self.size_ratio,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.size_ratio < 2 {
            return bad(format!("size ratio must be >= 2, got {}", self.size_ratio));
        }
        if self.key_width == 0 {
            return bad("key width must be positive".into());
        }
        if self.entry_size() > self.page_size {
            return bad(format!(
                "entry size {} exceeds page size {}",
                self.entry_size(),
                self.page_size
            ));
        }
        if self.buffer_capacity == 0 || self.buffer_capacity % self.entry_size() != 0 {
            return bad(format!(
                "buffer capacity {} must be a positive multiple of the entry size {}",
                self.buffer_capacity,
                self.entry_size()
            ));
        }
        if self.max_levels == 0 {
            return bad("max_levels must be at least 1".into());
        }
        let bits = self.bloom.bits();
        if !(bits.is_finite() && bits > 0.0) {
            return bad(format!("bloom bits per key must be positive, got {bits}"));
        }
        self.check_policy(self.initial_policy)?;
        self.io_cost.validate()
    }
}
