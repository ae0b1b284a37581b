use serde::Serialize;

use super::run::Run;

/// One level of the tree: at most one active run plus any number of sealed
/// runs of possibly different sizes.
#[derive(Debug, Clone)]
pub struct Level {
    pub(crate) index: usize,
    pub(crate) capacity: u64,
    pub(crate) policy: usize,
    pub(crate) pending_policy: Option<usize>,
    pub(crate) active: Option<Run>,
    /// Oldest first.
    pub(crate) sealed: Vec<Run>,
}

impl Level {
    pub(crate) fn new(index: usize, capacity: u64, policy: usize) -> Self {
        Level {
            index,
            capacity,
            policy,
            pending_policy: None,
            active: None,
            sealed: Vec::new(),
        }
    }

    /// 1-based level number.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Capacity `C_i` in bytes.
    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Current compaction policy `K_i`.
    pub fn policy(&self) -> usize {
        self.policy
    }

    /// Policy recorded by a lazy transition, applied at the next full-level
    /// compaction.
    pub fn pending_policy(&self) -> Option<usize> {
        self.pending_policy
    }

    /// Capacity given to a newly opened active run: `C_i / K_i`.
    pub fn active_capacity(&self) -> u64 {
        self.capacity / self.policy as u64
    }

    pub fn active_run(&self) -> Option<&Run> {
        self.active.as_ref()
    }

    /// Sealed runs, newest first.
    pub fn sealed_runs(&self) -> impl DoubleEndedIterator<Item = &Run> + ExactSizeIterator {
        self.sealed.iter().rev()
    }

    /// All runs in lookup order, newest first.
    pub fn runs(&self) -> impl Iterator<Item = &Run> {
        self.active.iter().chain(self.sealed.iter().rev())
    }

    pub fn run_count(&self) -> usize {
        self.sealed.len() + usize::from(self.active.is_some())
    }

    /// `D_i`: bytes held by all runs.
    pub fn data_size(&self) -> u64 {
        self.runs().map(Run::data_size).sum()
    }

    pub fn fill_ratio(&self) -> f64 {
        self.data_size() as f64 / self.capacity as f64
    }

    pub fn is_empty(&self) -> bool {
        self.run_count() == 0
    }

    pub(crate) fn is_full(&self) -> bool {
        self.data_size() >= self.capacity
    }

    pub(crate) fn seal_active(&mut self) {
        if let Some(mut run) = self.active.take() {
            run.state = super::run::RunState::Sealed;
            self.sealed.push(run);
        }
    }

    pub(crate) fn snapshot(&self) -> LevelSnapshot {
        LevelSnapshot {
            index: self.index,
            policy: self.policy,
            pending_policy: self.pending_policy,
            run_count: self.run_count(),
            sealed_runs: self.sealed.len(),
            data_size: self.data_size(),
            capacity: self.capacity,
            active_capacity: self
                .active
                .as_ref()
                .map_or(self.active_capacity(), |r| r.capacity),
            fill_ratio: self.fill_ratio(),
        }
    }
}

/// Read-only structural summary of one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSnapshot {
    pub index: usize,
    pub policy: usize,
    pub pending_policy: Option<usize>,
    pub run_count: usize,
    pub sealed_runs: usize,
    pub data_size: u64,
    pub capacity: u64,
    pub active_capacity: u64,
    pub fill_ratio: f64,
}
