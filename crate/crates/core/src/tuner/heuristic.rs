//! Threshold baseline: make a level lazier when few of the operations
//! reaching it are lookups and more aggressive when most are.

use crate::engine::FlsmTree;
use crate::error::{Error, Result};
use crate::harness::{Controller, Decision};
use crate::stats::MissionStats;
use crate::transition::{TransitionKind, TransitionRequest};

/// `+1` below `h_bottom`, `-1` above `h_top`, else `0`.
pub fn heuristic_delta(lookup_fraction: f64, h_bottom: f64, h_top: f64) -> i32 {
    if lookup_fraction < h_bottom {
        1
    } else if lookup_fraction > h_top {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone)]
pub struct HeuristicTuner {
    h_bottom: f64,
    h_top: f64,
    transition: TransitionKind,
}

impl HeuristicTuner {
    pub fn new(h_bottom: f64, h_top: f64) -> Result<Self> {
        if !(0.0 <= h_bottom && h_bottom <= h_top && h_top <= 1.0) {
            return Err(Error::Thresholds {
                bottom: h_bottom,
                top: h_top,
            });
        }
        Ok(HeuristicTuner {
            h_bottom,
            h_top,
            transition: TransitionKind::Flexible,
        })
    }

    pub fn with_transition(mut self, kind: TransitionKind) -> Self {
        self.transition = kind;
        self
    }

    /// One delta per materialized level, Level 1 first.
    pub fn deltas(&self, stats: &MissionStats, levels: usize) -> Vec<i32> {
        (1..=levels)
            .map(|i| heuristic_delta(stats.level_lookup_fraction(i), self.h_bottom, self.h_top))
            .collect()
    }
}

impl Controller for HeuristicTuner {
    fn end_of_mission(&mut self, stats: &MissionStats, tree: &mut FlsmTree) -> Result<Decision> {
        let t = tree.config().size_ratio as i64;
        let deltas = self.deltas(stats, tree.level_count());
        let mut applied = Vec::new();
        for (j, d) in deltas.into_iter().enumerate() {
            let level = j + 1;
            let k = tree.level(level).map_or(1, |l| l.policy()) as i64;
            let next = (k + d as i64).clamp(1, t) as usize;
            if next as i64 != k {
                tree.apply_transition(TransitionRequest {
                    level,
                    new_policy: next,
                    kind: self.transition,
                })?;
                applied.push(format!("L{level}:{d:+}"));
            }
        }
        Ok(Decision {
            reward: None,
            action: applied.join(" "),
        })
    }
}
