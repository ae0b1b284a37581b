//! Brute-force fixed-policy sweeps.

use serde::Serialize;

use super::experiment::{run_experiment, ExperimentConfig, ExperimentResult, PolicyMode};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    /// `(K, result)` in sweep order.
    pub runs: Vec<(usize, ExperimentResult)>,
}

impl SweepResult {
    /// `(K, mean latency per op)` over whole runs.
    pub fn table(&self) -> Vec<(usize, f64)> {
        self.runs
            .iter()
            .map(|(k, r)| (*k, r.mean_latency_per_op))
            .collect()
    }

    /// `(K, mean latency per op)` restricted to one session.
    pub fn session_table(&self, session: usize) -> Vec<(usize, f64)> {
        self.runs
            .iter()
            .map(|(k, r)| (*k, r.mean_latency_where(|m| m.session == session)))
            .collect()
    }

    /// Policy with the lowest mean latency; the smaller K wins ties.
    pub fn best(&self) -> usize {
        argmin(&self.table())
    }

    pub fn session_best(&self, session: usize) -> usize {
        argmin(&self.session_table(session))
    }

    pub fn latency_of(&self, k: usize) -> Option<f64> {
        self.table().into_iter().find(|(kk, _)| *kk == k).map(|(_, l)| l)
    }
}

fn argmin(rows: &[(usize, f64)]) -> usize {
    rows.iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|r| r.0)
        .unwrap_or(1)
}

/// Runs `Fixed(K)` for every `K` in `ks` on the workload and seed of `cfg`.
pub fn sweep_fixed_k(cfg: &ExperimentConfig, ks: impl IntoIterator<Item = usize>) -> Result<SweepResult> {
    let runs = ks
        .into_iter()
        .map(|k| {
            let c = ExperimentConfig {
                policy: PolicyMode::Fixed { k },
                ..cfg.clone()
            };
            run_experiment(&c).map(|r| (k, r))
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { runs })
}
