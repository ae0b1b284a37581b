use serde::Serialize;

use crate::engine::FlsmTree;
use crate::stats::MissionStats;

pub const STATE_DIM: usize = 7;

/// Per-level features, each in `[0, 1]`:
/// policy / T, fill ratio, run count / (T + 1), squashed read and write
/// pages per operation, the lookup fraction of the mission just finished,
/// and the squashed per-level latency per operation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LevelState(pub [f64; STATE_DIM]);

/// Maps `[0, inf)` onto `[0, 1)`, with `x = 0.1` landing at one half.
fn squash(x: f64) -> f64 {
    let y = 10.0 * x.max(0.0);
    y / (1.0 + y)
}

impl LevelState {
    pub fn observe(stats: &MissionStats, tree: &FlsmTree, level: usize) -> Self {
        let t = tree.config().size_ratio as f64;
        let (policy, fill, runs) = match tree.level(level) {
            Some(l) => (l.policy(), l.fill_ratio(), l.run_count()),
            None => (tree.default_policy(), 0.0, 0),
        };
        let ops = stats.ops().max(1) as f64;
        let c = stats.level(level);
        LevelState([
            policy as f64 / t,
            fill.clamp(0.0, 1.0),
            (runs as f64 / (t + 1.0)).min(1.0),
            squash(c.read_pages as f64 / ops),
            squash(c.write_pages as f64 / ops),
            stats.gamma(),
            squash(stats.level_latency_per_op(level)),
        ])
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squash_is_bounded_and_monotone() {
        assert_eq!(squash(0.0), 0.0);
        assert_eq!(squash(0.1), 0.5);
        assert!(squash(1e9) < 1.0);
        assert!(squash(0.2) > squash(0.1));
    }
}
