//! The flexible LSM-tree.
//!
//! Updates land in an ordered memory buffer. A full buffer is flushed as a
//! sorted run into Level 1. Each level `i` has capacity `C_i = T^i` buffers
//! and a policy `K_i`: incoming data is merged into the level's single active
//! run until that run reaches `C_i / K_i`, at which point it is sealed. Once a
//! level holds `C_i` bytes, all of its runs are merged and admitted into the
//! next level.
//!
//! All I/O is simulated: every page read or written and every CPU charge
//! advances a deterministic clock and is reported to the [`StatsCollector`].

mod config;
pub mod format;
mod level;
mod run;

use std::collections::BTreeMap;

use serde::Serialize;

pub use config::{BloomScheme, CostModelParams, EngineConfig, SEQUENCE_WIDTH};
pub use level::{Level, LevelSnapshot};
pub use run::{Entry, Run, RunState};

use crate::error::{Error, Result};
use crate::filter::{FprSchedule, KeyHash};
use crate::stats::{Event, MissionStats, OpKind, StatsCollector};
use format::RunStore;
use run::merge_all;

/// Global page and CPU tallies since the tree was created.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IoCounters {
    pub read_pages: u64,
    pub write_pages: u64,
    pub probes: u64,
    pub merged_entries: u64,
}

/// Read-only structural summary of a tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineSnapshot {
    pub levels: Vec<LevelSnapshot>,
    pub buffer_entries: usize,
    pub io: IoCounters,
    pub clock: f64,
}

impl EngineSnapshot {
    /// Policies of the materialized levels, Level 1 first.
    pub fn policies(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.policy).collect()
    }

    pub fn fill_ratios(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.fill_ratio).collect()
    }
}

/// Charges simulated costs and forwards them to the stats collector.
#[derive(Debug, Clone)]
pub(crate) struct Meter {
    params: CostModelParams,
    pub(crate) io: IoCounters,
    pub(crate) clock: f64,
    pub(crate) stats: StatsCollector,
}

impl Meter {
    fn emit(&mut self, event: Event, time: f64) {
        self.clock += time;
        self.stats
            .record_event(event)
            .expect("engine only tags levels within max_levels");
    }

    fn read(&mut self, level: usize, pages: u64) {
        if pages == 0 {
            return;
        }
        let time = pages as f64 * self.params.read_io;
        self.io.read_pages += pages;
        self.emit(Event::PageRead { level, pages, time }, time);
    }

    fn write(&mut self, level: usize, pages: u64) {
        if pages == 0 {
            return;
        }
        let time = pages as f64 * self.params.write_io;
        self.io.write_pages += pages;
        self.emit(Event::PageWrite { level, pages, time }, time);
    }

    fn probe(&mut self, level: usize) {
        let time = self.params.run_probe_cpu;
        self.io.probes += 1;
        self.emit(Event::Probe { level, time }, time);
    }

    fn merge(&mut self, level: usize, entries: u64) {
        if entries == 0 {
            return;
        }
        let time = entries as f64 * self.params.compact_cpu_per_entry;
        self.io.merged_entries += entries;
        self.emit(
            Event::MergeCpu {
                level,
                entries,
                time,
            },
            time,
        );
    }

    fn mark(&mut self, event: Event) {
        self.emit(event, 0.0);
    }
}

type BufferMap = BTreeMap<Box<[u8]>, (Box<[u8]>, u64)>;

/// A flexible LSM-tree instance. Single-threaded: all operations run to
/// completion, including cascaded compactions, before returning.
#[derive(Debug)]
pub struct FlsmTree {
    pub(crate) config: EngineConfig,
    schedule: FprSchedule,
    buffer: BufferMap,
    /// `levels[0]` is Level 1.
    pub(crate) levels: Vec<Level>,
    pub(crate) default_policy: usize,
    next_seq: u64,
    next_run_id: u64,
    flushes: u64,
    pub(crate) meter: Meter,
    store: Option<RunStore>,
}

impl FlsmTree {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let store = config.persist_dir.as_deref().map(RunStore::open).transpose()?;
        Ok(FlsmTree {
            schedule: config.fpr_schedule(),
            buffer: BTreeMap::new(),
            levels: Vec::new(),
            default_policy: config.initial_policy,
            next_seq: 1,
            next_run_id: 1,
            flushes: 0,
            meter: Meter {
                params: config.io_cost,
                io: IoCounters::default(),
                clock: 0.0,
                stats: StatsCollector::new(config.max_levels),
            },
            store,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Materialized levels, Level 1 first.
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// 1-based level lookup.
    pub fn level(&self, index: usize) -> Option<&Level> {
        index.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Policy given to levels materialized from now on.
    pub fn default_policy(&self) -> usize {
        self.default_policy
    }

    pub fn set_default_policy(&mut self, policy: usize) -> Result<()> {
        self.config.check_policy(policy)?;
        self.default_policy = policy;
        Ok(())
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Number of buffer flushes so far.
    pub fn flush_count(&self) -> u64 {
        self.flushes
    }

    pub fn io_counters(&self) -> IoCounters {
        self.meter.io
    }

    /// Simulated time elapsed since creation.
    pub fn clock(&self) -> f64 {
        self.meter.clock
    }

    pub fn stats(&self) -> &StatsCollector {
        &self.meter.stats
    }

    pub fn stats_mut(&mut self) -> &mut StatsCollector {
        &mut self.meter.stats
    }

    /// Closes the current statistics mission.
    pub fn finalize_mission(&mut self) -> MissionStats {
        self.meter.stats.finalize_mission()
    }

    /// Discards statistics gathered so far without touching the I/O
    /// counters or the clock.
    pub fn reset_stats(&mut self) {
        let mut fresh = StatsCollector::new(self.config.max_levels);
        if self.meter.stats.log_enabled() {
            fresh.enable_log();
        }
        fresh.set_record_wall_time(self.meter.stats.records_wall_time());
        self.meter.stats = fresh;
    }

    fn check_widths(&self, key: &[u8], value: Option<&[u8]>) -> Result<()> {
        if key.len() != self.config.key_width {
            return Err(Error::KeyWidth {
                expected: self.config.key_width,
                got: key.len(),
            });
        }
        if let Some(v) = value {
            if v.len() != self.config.value_width {
                return Err(Error::ValueWidth {
                    expected: self.config.value_width,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.check_widths(key, Some(value))?;
        let start = self.meter.clock;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.buffer.insert(key.into(), (value.into(), seq));
        if self.buffer.len() as u64 >= self.config.buffer_entries() {
            self.flush_buffer()?;
        }
        let time = self.meter.clock - start;
        self.meter.mark(Event::OpComplete {
            kind: OpKind::Update,
            time,
        });
        Ok(())
    }

    pub fn get(&mut self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        self.check_widths(key, None)?;
        let start = self.meter.clock;
        let found = self.lookup(key);
        let time = self.meter.clock - start;
        self.meter.mark(Event::OpComplete {
            kind: OpKind::Lookup,
            time,
        });
        Ok(found)
    }

    fn lookup(&mut self, key: &[u8]) -> Option<Vec<u8>> {
        if let Some((value, _)) = self.buffer.get(key) {
            return Some(value.to_vec());
        }
        let hash = KeyHash::of(key);
        for level in &self.levels {
            if level.is_empty() {
                continue;
            }
            let tag = level.index;
            self.meter.mark(Event::LevelVisit { level: tag });
            for run in level.runs() {
                if run.is_empty() {
                    continue;
                }
                self.meter.probe(tag);
                if !run.may_contain(&hash) {
                    continue;
                }
                self.meter.read(tag, 1);
                if let Some(e) = run.find(key) {
                    return Some(e.value.to_vec());
                }
            }
        }
        None
    }

    /// Writes the buffer out as a sorted run into Level 1. No-op when the
    /// buffer is empty.
    pub fn flush_buffer(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let entries: Vec<Entry> = std::mem::take(&mut self.buffer)
            .into_iter()
            .map(|(key, (value, seq))| Entry { key, value, seq })
            .collect();
        self.flushes += 1;
        self.ensure_level(1);
        self.admit_cascade(1, entries)
    }

    /// Materializes empty levels up to and including `index`.
    pub(crate) fn ensure_level(&mut self, index: usize) {
        while self.levels.len() < index {
            let i = self.levels.len() + 1;
            self.levels
                .push(Level::new(i, self.config.level_capacity(i), self.default_policy));
        }
    }

    pub(crate) fn check_level(&self, index: usize) -> Result<()> {
        if (1..=self.config.max_levels).contains(&index) {
            Ok(())
        } else {
            Err(Error::NoSuchLevel(index))
        }
    }

    /// Admits `incoming` into `index`, then compacts full levels downward.
    fn admit_cascade(&mut self, mut index: usize, mut incoming: Vec<Entry>) -> Result<()> {
        loop {
            self.admit_run(index, incoming)?;
            let level = &self.levels[index - 1];
            if !level.is_full() || index >= self.config.max_levels {
                return Ok(());
            }
            incoming = self.drain_level(index)?;
            index += 1;
            self.ensure_level(index);
        }
    }

    /// Merges `incoming` into the active run of level `index`. Whenever the
    /// merged data reaches the active-run capacity `C_i / K_i`, that much is
    /// sealed as a run of its own (splitting at a key boundary) and the
    /// remainder stays active.
    fn admit_run(&mut self, index: usize, incoming: Vec<Entry>) -> Result<()> {
        let entry_size = self.config.entry_size();
        let level = &mut self.levels[index - 1];
        let cap = level.active_capacity();
        let cap_entries = ((cap / entry_size) as usize).max(1);

        let (old, old_id) = match level.active.take() {
            Some(run) => (run.entries, Some(run.id)),
            None => (Vec::new(), None),
        };
        let old_len = old.len();
        let input_len = old_len + incoming.len();
        let mut merged = if old.is_empty() {
            incoming
        } else {
            merge_all(vec![old, incoming])
        };

        let mut chunks = Vec::new();
        while merged.len() >= cap_entries {
            let rest = merged.split_off(cap_entries);
            chunks.push(std::mem::replace(&mut merged, rest));
        }
        let sealed_count = chunks.len();
        if !merged.is_empty() {
            chunks.push(merged);
        }

        self.meter.read(index, self.config.pages_for(old_len));
        self.meter.merge(index, input_len as u64);
        let pages = chunks.iter().map(|c| self.config.pages_for(c.len())).sum();
        self.meter.write(index, pages);

        for (n, chunk) in chunks.into_iter().enumerate() {
            let id = self.fresh_run_id();
            let run = Run::build(
                id,
                index,
                cap,
                entry_size,
                self.config.entries_per_page() as usize,
                self.schedule.level_fpr(index),
                chunk,
            );
            self.persist(&run)?;
            let level = &mut self.levels[index - 1];
            level.active = Some(run);
            if n < sealed_count {
                level.seal_active();
            }
        }
        if let (Some(old), Some(store)) = (old_id, &self.store) {
            store.remove(old)?;
        }
        Ok(())
    }

    /// Reads and merges every run of level `index`, leaving it empty. A
    /// pending lazy policy becomes current here.
    pub(crate) fn drain_level(&mut self, index: usize) -> Result<Vec<Entry>> {
        let level = &mut self.levels[index - 1];
        let mut runs: Vec<Run> = level.sealed.drain(..).collect();
        runs.extend(level.active.take());
        if let Some(p) = level.pending_policy.take() {
            level.policy = p;
        }
        let pages: u64 = runs.iter().map(|r| self.config.pages_for(r.len())).sum();
        let entries: u64 = runs.iter().map(|r| r.len() as u64).sum();
        self.meter.read(index, pages);
        self.meter.merge(index, entries);
        self.meter.mark(Event::Compaction { level: index });
        if let Some(store) = &self.store {
            for r in &runs {
                store.remove(r.id)?;
            }
        }
        let merged = merge_all(runs.into_iter().map(|r| r.entries).collect());
        debug_assert!(run::is_strictly_sorted(&merged));
        Ok(merged)
    }

    /// Merges level `index` into the next level regardless of its fill.
    /// Returns false when there was nothing to move.
    pub(crate) fn force_compact(&mut self, index: usize) -> Result<bool> {
        if self.level(index).is_none_or(Level::is_empty) {
            return Ok(false);
        }
        let merged = self.drain_level(index)?;
        if index >= self.config.max_levels {
            // Nowhere to go: rewrite in place as a single run.
            self.admit_run(index, merged)?;
        } else {
            self.ensure_level(index + 1);
            self.admit_cascade(index + 1, merged)?;
        }
        Ok(true)
    }

    fn fresh_run_id(&mut self) -> u64 {
        let id = self.next_run_id;
        self.next_run_id += 1;
        id
    }

    fn persist(&self, run: &Run) -> Result<()> {
        let Some(store) = &self.store else {
            return Ok(());
        };
        let bytes = format::encode(
            run.entries(),
            run.fences(),
            run.bloom(),
            self.config.key_width,
            self.config.value_width,
            self.config.page_size as usize,
        );
        store.write(run.id, &bytes)
    }

    /// Path of the persisted file for run `id`, when persistence is on.
    pub fn run_path(&self, id: u64) -> Option<std::path::PathBuf> {
        self.store.as_ref().map(|s| s.path(id))
    }

    /// Structural summary; charges nothing.
    pub fn snapshot_state(&self) -> EngineSnapshot {
        EngineSnapshot {
            levels: self.levels.iter().map(Level::snapshot).collect(),
            buffer_entries: self.buffer.len(),
            io: self.meter.io,
            clock: self.meter.clock,
        }
    }

    /// Every live key with its latest value, in key order. Charges nothing.
    pub fn scan_all(&self) -> Vec<(Vec<u8>, Vec<u8>)> {
        let mut latest: BTreeMap<&[u8], (&[u8], u64)> = BTreeMap::new();
        let runs = self.levels.iter().flat_map(Level::runs);
        let buffered = self.buffer.iter().map(|(k, (v, s))| (&**k, &**v, *s));
        let stored = runs.flat_map(|r| r.entries().iter().map(|e| (&*e.key, &*e.value, e.seq)));
        for (k, v, s) in buffered.chain(stored) {
            match latest.get(k) {
                Some((_, seen)) if *seen >= s => {}
                _ => {
                    latest.insert(k, (v, s));
                }
            }
        }
        latest
            .into_iter()
            .map(|(k, (v, _))| (k.to_vec(), v.to_vec()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EngineConfig {
        EngineConfig {
            size_ratio: 4,
            key_width: 8,
            value_width: 8,
            page_size: 96,
            buffer_capacity: 8 * 24,
            ..Default::default()
        }
    }

    fn key(i: u64) -> [u8; 8] {
        i.to_be_bytes()
    }

    #[test]
    fn one_flush_per_buffer() {
        let cfg = small();
        let mut t = FlsmTree::new(cfg.clone()).unwrap();
        for i in 0..cfg.buffer_entries() {
            t.put(&key(i), &key(i)).unwrap();
        }
        assert_eq!(t.flush_count(), 1);
        let l1 = t.level(1).unwrap();
        assert_eq!(l1.run_count(), 1);
        assert_eq!(l1.data_size(), cfg.buffer_capacity);
        assert_eq!(t.io_counters().write_pages, 2);
        assert_eq!(t.snapshot_state().levels[0].fill_ratio, 0.25);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut t = FlsmTree::new(small()).unwrap();
        assert!(matches!(t.put(&[1], &key(0)), Err(Error::KeyWidth { .. })));
        assert!(matches!(t.put(&key(0), &[1]), Err(Error::ValueWidth { .. })));
        assert!(t.get(&[0; 3]).is_err());
    }

    #[test]
    fn empty_get_reads_nothing() {
        let mut t = FlsmTree::new(small()).unwrap();
        assert_eq!(t.get(&key(1)).unwrap(), None);
        assert_eq!(t.io_counters(), IoCounters::default());
    }

    #[test]
    fn snapshot_is_pure() {
        let mut t = FlsmTree::new(small()).unwrap();
        for i in 0..50 {
            t.put(&key(i), &key(i)).unwrap();
        }
        assert_eq!(t.snapshot_state(), t.snapshot_state());
    }
}
