use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, FlsmTree};
use crate::error::{Error, Result};
use crate::stats::MissionStats;
use crate::transition::TransitionKind;
use crate::tuner::{HeuristicTuner, LerpTuner, TunerConfig};
use crate::workload::{Op, WorkloadGenerator, WorkloadSpec};

/// How level policies are chosen during an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PolicyMode {
    /// Every level uses `k` for the whole run.
    Fixed { k: usize },
    /// Level `i` uses `policies[i - 1]`; deeper levels use the last entry.
    PropagatedFixed { policies: Vec<usize> },
    Heuristic { h_bottom: f64, h_top: f64 },
    Rl {
        #[serde(default)]
        tuner: TunerConfig,
    },
}

impl Default for PolicyMode {
    fn default() -> Self {
        PolicyMode::Rl {
            tuner: TunerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub engine: EngineConfig,
    pub workload: WorkloadSpec,
    pub policy: PolicyMode,
    /// Mechanism used by tuners to apply policy changes.
    pub transition: TransitionKind,
    /// Seeds both the workload and the tuner.
    pub seed: u64,
    /// Fill the `wall_ms` column; off keeps output byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            engine: EngineConfig::default(),
            workload: WorkloadSpec::default(),
            policy: PolicyMode::default(),
            transition: TransitionKind::Flexible,
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        self.workload.validate()?;
        match &self.policy {
            PolicyMode::Fixed { k } => self.engine.check_policy(*k),
            PolicyMode::PropagatedFixed { policies } => {
                if policies.is_empty() {
                    return Err(Error::InvalidConfig("empty policy vector".into()));
                }
                policies.iter().try_for_each(|&k| self.engine.check_policy(k))
            }
            PolicyMode::Heuristic { h_bottom, h_top } => {
                HeuristicTuner::new(*h_bottom, *h_top).map(|_| ())
            }
            PolicyMode::Rl { tuner } => tuner.validate(),
        }
    }
}

/// What a controller did at a mission boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decision {
    pub reward: Option<f64>,
    /// Free-form description of the applied change, empty when none.
    pub action: String,
}

/// Chooses policies between missions.
pub trait Controller {
    /// Called once after the preload, before the first mission.
    fn start(&mut self, _tree: &mut FlsmTree) -> Result<()> {
        Ok(())
    }

    fn end_of_mission(&mut self, stats: &MissionStats, tree: &mut FlsmTree) -> Result<Decision>;

    /// Mission index at which the controller last settled, if it has.
    fn converged_at(&self) -> Option<usize> {
        None
    }
}

struct FixedController {
    policies: Vec<usize>,
}

impl Controller for FixedController {
    fn start(&mut self, tree: &mut FlsmTree) -> Result<()> {
        tree.set_policies_flexible(&self.policies)
    }

    fn end_of_mission(&mut self, _: &MissionStats, _: &mut FlsmTree) -> Result<Decision> {
        Ok(Decision::default())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionRecord {
    pub mission: usize,
    pub session: usize,
    pub gamma: f64,
    pub t_prime: f64,
    pub wall_ms: f64,
    /// Policy per level slot, `1..=max_levels`.
    pub policies: Vec<usize>,
    pub fills: Vec<f64>,
    pub reads: u64,
    pub writes: u64,
    pub reward: Option<f64>,
    pub action: String,
    pub ops: u64,
    /// Simulated time spent inside lookups.
    pub lookup_time: f64,
}

impl MissionRecord {
    pub fn latency_per_op(&self) -> f64 {
        if self.ops == 0 {
            0.0
        } else {
            self.t_prime / self.ops as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session: usize,
    pub gamma: f64,
    pub missions: usize,
    pub mean_latency_per_op: f64,
    /// Policies in force at the end of the session.
    pub final_policies: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<MissionRecord>,
    pub sessions: Vec<SessionSummary>,
    pub final_policies: Vec<usize>,
    pub converged_at: Option<usize>,
    pub mean_latency_per_op: f64,
}

impl ExperimentResult {
    /// Mean per-op latency over the missions selected by `keep`.
    pub fn mean_latency_where(&self, keep: impl Fn(&MissionRecord) -> bool) -> f64 {
        let (t, n) = self
            .records
            .iter()
            .filter(|r| keep(r))
            .fold((0.0, 0u64), |(t, n), r| (t + r.t_prime, n + r.ops));
        if n == 0 {
            0.0
        } else {
            t / n as f64
        }
    }
}

fn policy_slots(tree: &FlsmTree) -> (Vec<usize>, Vec<f64>) {
    let slots = tree.config().max_levels;
    let mut k = vec![tree.default_policy(); slots];
    let mut fill = vec![0.0; slots];
    for l in tree.levels() {
        k[l.index() - 1] = l.policy();
        fill[l.index() - 1] = l.fill_ratio();
    }
    (k, fill)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut controller: Box<dyn Controller> = match &cfg.policy {
        PolicyMode::Fixed { k } => Box::new(FixedController { policies: vec![*k] }),
        PolicyMode::PropagatedFixed { policies } => Box::new(FixedController {
            policies: policies.clone(),
        }),
        PolicyMode::Heuristic { h_bottom, h_top } => {
            Box::new(HeuristicTuner::new(*h_bottom, *h_top)?.with_transition(cfg.transition))
        }
        PolicyMode::Rl { tuner } => Box::new(LerpTuner::new(
            tuner.clone(),
            &cfg.engine,
            cfg.transition,
            cfg.seed,
        )?),
    };
    run_with_controller(cfg, controller.as_mut())
}

/// Runs the mission loop of `cfg` under an arbitrary controller.
pub fn run_with_controller(
    cfg: &ExperimentConfig,
    controller: &mut dyn Controller,
) -> Result<ExperimentResult> {
    let mut engine = cfg.engine.clone();
    if let PolicyMode::Fixed { k } = cfg.policy {
        engine.initial_policy = k;
    } else if let PolicyMode::PropagatedFixed { policies } = &cfg.policy {
        engine.initial_policy = policies[0];
    }
    let mut tree = FlsmTree::new(engine)?;
    let workload = WorkloadSpec {
        seed: cfg.seed,
        ..cfg.workload.clone()
    };
    let gammas: Vec<f64> = workload.sessions.iter().map(|s| s.lookup_fraction).collect();
    let mut generator = WorkloadGenerator::new(workload, cfg.engine.key_width, cfg.engine.value_width)?;

    controller.start(&mut tree)?;
    for (k, v) in generator.preload() {
        tree.put(&k, &v)?;
    }
    tree.reset_stats();
    tree.stats_mut().set_record_wall_time(cfg.record_wall_time);

    let mut records = Vec::new();
    for mission in generator {
        for op in &mission.ops {
            match op {
                Op::Lookup(k) => {
                    tree.get(k)?;
                }
                Op::Update(k, v) => tree.put(k, v)?,
            }
        }
        let stats = tree.finalize_mission();
        let decision = controller.end_of_mission(&stats, &mut tree)?;
        let (policies, fills) = policy_slots(&tree);
        records.push(MissionRecord {
            mission: mission.index,
            session: mission.session,
            gamma: stats.gamma(),
            t_prime: stats.t_prime,
            wall_ms: stats.wall_ms,
            policies,
            fills,
            reads: stats.read_pages(),
            writes: stats.write_pages(),
            reward: decision.reward,
            action: decision.action,
            ops: stats.ops(),
            lookup_time: stats.lookup_time,
        });
    }

    let sessions = gammas
        .iter()
        .enumerate()
        .map(|(s, &gamma)| {
            let rows: Vec<&MissionRecord> = records.iter().filter(|r| r.session == s).collect();
            let (t, n) = rows.iter().fold((0.0, 0), |(t, n), r| (t + r.t_prime, n + r.ops));
            SessionSummary {
                session: s,
                gamma,
                missions: rows.len(),
                mean_latency_per_op: if n == 0 { 0.0 } else { t / n as f64 },
                final_policies: rows.last().map(|r| r.policies.clone()).unwrap_or_default(),
            }
        })
        .collect();
    let (t, n) = records.iter().fold((0.0, 0), |(t, n), r| (t + r.t_prime, n + r.ops));
    let (final_policies, _) = policy_slots(&tree);
    Ok(ExperimentResult {
        records,
        sessions,
        final_policies,
        converged_at: controller.converged_at(),
        mean_latency_per_op: if n == 0 { 0.0 } else { t / n as f64 },
    })
}

/// Writes the per-mission metrics CSV.
pub fn write_csv<W: Write>(out: W, records: &[MissionRecord], levels: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["mission", "session", "gamma", "t_prime_sim", "wall_ms"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=levels).map(|i| format!("K{i}")));
    header.extend((1..=levels).map(|i| format!("fill{i}")));
    header.extend(["reads", "writes", "reward", "action"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.mission.to_string(),
            r.session.to_string(),
            format!("{:.6}", r.gamma),
            format!("{:.6}", r.t_prime),
            format!("{:.3}", r.wall_ms),
        ];
        row.extend((0..levels).map(|i| r.policies.get(i).map_or(String::new(), |k| k.to_string())));
        row.extend((0..levels).map(|i| r.fills.get(i).map_or(String::new(), |f| format!("{f:.6}"))));
        row.push(r.reads.to_string());
        row.push(r.writes.to_string());
        row.push(r.reward.map_or(String::new(), |x| format!("{x:.6}")));
        row.push(r.action.clone());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
