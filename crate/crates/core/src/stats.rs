//! Per-mission statistics collector.
//!
//! The engine reports every charged resource as an [`Event`] tagged with the
//! level it is attributed to. Level 0 is the memory buffer; levels `1..` are
//! the on-disk levels. The collector folds events into [`MissionStats`] and
//! hands a snapshot out at each mission boundary.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OpKind {
    Lookup,
    Update,
}

/// A charge or milestone emitted by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Event {
    PageRead { level: usize, pages: u64, time: f64 },
    PageWrite { level: usize, pages: u64, time: f64 },
    Probe { level: usize, time: f64 },
    MergeCpu { level: usize, entries: u64, time: f64 },
    /// A lookup started probing the level's runs.
    LevelVisit { level: usize },
    /// The level was merged whole into the next one.
    Compaction { level: usize },
    OpComplete { kind: OpKind, time: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelCounters {
    pub read_pages: u64,
    pub write_pages: u64,
    pub probes: u64,
    pub merged_entries: u64,
    pub compactions: u64,
    /// Lookups that reached this level.
    pub lookups: u64,
    /// Simulated time attributed to this level.
    pub time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MissionStats {
    pub mission: usize,
    /// Index 0 is the buffer pseudo-level.
    pub levels: Vec<LevelCounters>,
    /// End-to-end simulated time of the mission.
    pub t_prime: f64,
    pub wall_ms: f64,
    pub lookups: u64,
    pub updates: u64,
    pub lookup_time: f64,
    pub update_time: f64,
}

impl MissionStats {
    pub fn ops(&self) -> u64 {
        self.lookups + self.updates
    }

    /// Observed lookup fraction; zero for an empty mission.
    pub fn gamma(&self) -> f64 {
        if self.ops() == 0 {
            0.0
        } else {
            self.lookups as f64 / self.ops() as f64
        }
    }

    pub fn level(&self, level: usize) -> LevelCounters {
        self.levels.get(level).cloned().unwrap_or_default()
    }

    pub fn read_pages(&self) -> u64 {
        self.levels.iter().map(|l| l.read_pages).sum()
    }

    pub fn write_pages(&self) -> u64 {
        self.levels.iter().map(|l| l.write_pages).sum()
    }

    /// Mean simulated time per operation.
    pub fn latency_per_op(&self) -> f64 {
        per(self.t_prime, self.ops())
    }

    /// Simulated time attributed to `level`, per mission operation.
    pub fn level_latency_per_op(&self, level: usize) -> f64 {
        per(self.level(level).time, self.ops())
    }

    /// Fraction of lookups among the operations that touched `level`; every
    /// update eventually passes through every level.
    pub fn level_lookup_fraction(&self, level: usize) -> f64 {
        let lookups = self.level(level).lookups;
        let total = lookups + self.updates;
        if total == 0 {
            0.0
        } else {
            lookups as f64 / total as f64
        }
    }
}

fn counters(s: &mut MissionStats, level: usize) -> Result<&mut LevelCounters> {
    s.levels.get_mut(level).ok_or(Error::UnknownLevel(level))
}

fn per(total: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Accumulates events for the current mission.
#[derive(Debug, Clone)]
pub struct StatsCollector {
    current: MissionStats,
    started: Instant,
    record_wall_time: bool,
    log: Option<Vec<Event>>,
}

impl StatsCollector {
    /// A collector accepting level tags `0..=max_level`.
    pub fn new(max_level: usize) -> Self {
        StatsCollector {
            current: MissionStats {
                levels: vec![LevelCounters::default(); max_level + 1],
                ..Default::default()
            },
            started: Instant::now(),
            record_wall_time: true,
            log: None,
        }
    }

    /// Keep a copy of every event recorded from now on.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log_enabled(&self) -> bool {
        self.log.is_some()
    }

    pub fn records_wall_time(&self) -> bool {
        self.record_wall_time
    }

    pub fn take_log(&mut self) -> Vec<Event> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Wall time is reported as zero when disabled, keeping outputs
    /// reproducible.
    pub fn set_record_wall_time(&mut self, on: bool) {
        self.record_wall_time = on;
    }

    pub fn current(&self) -> &MissionStats {
        &self.current
    }

    pub fn record_event(&mut self, event: Event) -> Result<()> {
        let slots = self.current.levels.len();
        let s = &mut self.current;
        match event {
            Event::PageRead { level, pages, time } => {
                let c = counters(s, level)?;
                c.read_pages += pages;
                c.time += time;
                s.t_prime += time;
            }
            Event::PageWrite { level, pages, time } => {
                let c = counters(s, level)?;
                c.write_pages += pages;
                c.time += time;
                s.t_prime += time;
            }
            Event::Probe { level, time } => {
                let c = counters(s, level)?;
                c.probes += 1;
                c.time += time;
                s.t_prime += time;
            }
            Event::MergeCpu {
                level,
                entries,
                time,
            } => {
                let c = counters(s, level)?;
                c.merged_entries += entries;
                c.time += time;
                s.t_prime += time;
            }
            Event::LevelVisit { level } => counters(s, level)?.lookups += 1,
            Event::Compaction { level } => counters(s, level)?.compactions += 1,
            Event::OpComplete { kind, time } => match kind {
                OpKind::Lookup => {
                    s.lookups += 1;
                    s.lookup_time += time;
                }
                OpKind::Update => {
                    s.updates += 1;
                    s.update_time += time;
                }
            },
        }
        debug_assert_eq!(slots, s.levels.len());
        if let Some(log) = self.log.as_mut() {
            log.push(event);
        }
        Ok(())
    }

    /// Closes the current mission and starts a fresh one.
    pub fn finalize_mission(&mut self) -> MissionStats {
        let next = MissionStats {
            mission: self.current.mission + 1,
            levels: vec![LevelCounters::default(); self.current.levels.len()],
            ..Default::default()
        };
        let mut done = std::mem::replace(&mut self.current, next);
        if self.record_wall_time {
            done.wall_ms = self.started.elapsed().as_secs_f64() * 1e3;
        }
        self.started = Instant::now();
        done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_hitting_level_two() {
        let mut c = StatsCollector::new(3);
        c.record_event(Event::PageRead {
            level: 2,
            pages: 1,
            time: 1.0,
        })
        .unwrap();
        let s = c.finalize_mission();
        assert_eq!(s.level(2).read_pages, 1);
        assert_eq!(s.read_pages(), 1);
    }

    #[test]
    fn empty_mission_is_all_zero() {
        let mut c = StatsCollector::new(2);
        c.set_record_wall_time(false);
        let s = c.finalize_mission();
        assert_eq!(s.ops(), 0);
        assert_eq!(s.gamma(), 0.0);
        assert_eq!(s.t_prime, 0.0);
        assert!(s.levels.iter().all(|l| *l == LevelCounters::default()));
    }

    #[test]
    fn unknown_level_is_rejected() {
        let mut c = StatsCollector::new(2);
        let err = c.record_event(Event::Compaction { level: 3 }).unwrap_err();
        assert!(matches!(err, Error::UnknownLevel(3)));
    }

    #[test]
    fn consecutive_finalize_resets() {
        let mut c = StatsCollector::new(1);
        c.set_record_wall_time(false);
        c.record_event(Event::OpComplete {
            kind: OpKind::Lookup,
            time: 2.0,
        })
        .unwrap();
        c.record_event(Event::Probe { level: 1, time: 0.5 }).unwrap();
        let first = c.finalize_mission();
        assert_eq!(first.mission, 0);
        assert_eq!(first.gamma(), 1.0);
        let second = c.finalize_mission();
        assert_eq!(second.mission, 1);
        assert_eq!(second.ops(), 0);
        assert_eq!(second.level(1), LevelCounters::default());
    }
}
