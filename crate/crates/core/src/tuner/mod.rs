//! Per-level policy tuning.
//!
//! [`LerpTuner`] keeps one actor-critic per trained level. At every mission
//! boundary it observes the level, scores the previous action, trains, and
//! moves the level's policy by at most one step. With a uniform filter
//! layout only Level 1 is trained and every other level follows it; with a
//! Monkey layout Level 1 and then Level 2 are trained, and deeper levels are
//! derived from them by propagation.

pub mod checkpoint;
pub mod ddpg;
mod heuristic;
pub mod nn;
pub mod replay;
pub mod state;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use ddpg::{ActorCritic, Batch, DdpgParams, TrainReport};
pub use heuristic::{heuristic_delta, HeuristicTuner};
pub use replay::{ExperienceSample, ReplayBuffer};
pub use state::{LevelState, STATE_DIM};

use crate::analysis::propagate_all;
use crate::engine::{EngineConfig, FlsmTree};
use crate::error::{Error, Result};
use crate::filter::FprScheme;
use crate::harness::{Controller, Decision};
use crate::stats::MissionStats;
use crate::transition::{TransitionKind, TransitionRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunerConfig {
    /// Weight of the level's own latency against end-to-end latency.
    pub alpha: f64,
    pub noise_sigma: f64,
    pub noise_decay: f64,
    pub noise_floor: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub train_steps_per_mission: usize,
    /// Missions after a (re)start whose actions are drawn uniformly instead
    /// of from the actor.
    pub warmup_missions: usize,
    /// Missions each decision is held before its reward is read.
    pub decision_interval: usize,
    /// Missions the chosen policy must stay put to count as settled.
    pub convergence_window: usize,
    /// Bound on the variance of the noiseless actor output over the window.
    pub convergence_tolerance: f64,
    /// Lookup-fraction drift that restarts training.
    pub shift_threshold: f64,
    /// Missions after a (re)start whose mean combined latency becomes the
    /// fixed reward scale.
    pub scale_missions: usize,
    /// Rewards are clipped to `[-reward_clip, 0]`.
    pub reward_clip: f64,
    /// Policy the trained levels start from; `None` keeps the engine's.
    pub start_policy: Option<usize>,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            alpha: 0.5,
            noise_sigma: 0.4,
            noise_decay: 0.98,
            noise_floor: 0.05,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.9,
            tau: 0.005,
            batch_size: 32,
            buffer_capacity: 1024,
            hidden_width: 128,
            hidden_layers: 3,
            train_steps_per_mission: 4,
            warmup_missions: 40,
            decision_interval: 1,
            convergence_window: 30,
            convergence_tolerance: 0.01,
            shift_threshold: 0.15,
            scale_missions: 10,
            reward_clip: 2.0,
            start_policy: None,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("tuner: {m}")));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        let positive = [
            self.noise_sigma,
            self.noise_decay,
            self.actor_lr,
            self.critic_lr,
            self.tau,
            self.convergence_tolerance,
            self.shift_threshold,
            self.reward_clip,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("rates, noise and tolerances must be positive");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if self.noise_floor < 0.0 || self.tau > 1.0 || self.noise_decay > 1.0 {
            return bad("noise floor, tau or decay out of range");
        }
        if self.batch_size == 0
            || self.buffer_capacity < self.batch_size
            || self.hidden_width == 0
            || self.hidden_layers == 0
            || self.convergence_window == 0
            || self.scale_missions == 0
            || self.decision_interval == 0
        {
            return bad("sizes must be positive and the buffer must hold a batch");
        }
        Ok(())
    }

    fn ddpg(&self) -> DdpgParams {
        DdpgParams {
            state_dim: STATE_DIM,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            discount: self.discount,
            tau: self.tau,
        }
    }
}

/// Negated mix of level and end-to-end latency, divided by `scale`.
pub fn reward(t_level: f64, t_prime: f64, alpha: f64, scale: f64) -> f64 {
    -(alpha * t_level + (1.0 - alpha) * t_prime) / scale
}

/// Maps a continuous action in `[-1, 1]` onto a policy step.
pub fn discretize(action: f64) -> i32 {
    if action > 1.0 / 3.0 {
        1
    } else if action < -1.0 / 3.0 {
        -1
    } else {
        0
    }
}

/// Applies `delta` to `policy`, staying within `[1, size_ratio]`.
pub fn step_policy(policy: usize, delta: i32, size_ratio: usize) -> usize {
    (policy as i64 + delta as i64).clamp(1, size_ratio as i64) as usize
}

#[derive(Debug, Clone)]
struct LevelAgent {
    level: usize,
    ac: ActorCritic,
    buffer: ReplayBuffer,
    noise: f64,
    prev: Option<(LevelState, f64)>,
    policies: VecDeque<usize>,
    outputs: VecDeque<f64>,
    scale_sum: f64,
    scale_n: usize,
    steps: usize,
    converged: bool,
}

impl LevelAgent {
    /// Forgets everything learned under the previous workload.
    fn restart(&mut self, sigma: f64, ac: ActorCritic) {
        self.ac = ac;
        self.buffer.clear();
        self.noise = sigma;
        self.prev = None;
        self.policies.clear();
        self.outputs.clear();
        self.scale_sum = 0.0;
        self.scale_n = 0;
        self.steps = 0;
        self.converged = false;
    }
}

/// Per-mission training record, exposed for logging and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TunerStep {
    pub mission: usize,
    pub level: usize,
    pub reward: f64,
    pub actor_output: f64,
    pub delta: i32,
    pub policy: usize,
    pub report: Option<TrainReport>,
}

pub struct LerpTuner {
    cfg: TunerConfig,
    transition: TransitionKind,
    size_ratio: usize,
    max_levels: usize,
    scheme: FprScheme,
    agents: Vec<LevelAgent>,
    /// Index of the agent being trained; `agents.len()` once all settled.
    phase: usize,
    rng: ChaCha8Rng,
    gamma_ema: Option<f64>,
    mission: usize,
    since_decision: usize,
    converged_at: Option<usize>,
    history: Vec<TunerStep>,
}

impl LerpTuner {
    pub fn new(
        cfg: TunerConfig,
        engine: &EngineConfig,
        transition: TransitionKind,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(k) = cfg.start_policy {
            engine.check_policy(k)?;
        }
        let scheme = engine.fpr_schedule().scheme;
        let trained = match scheme {
            FprScheme::Uniform => 1,
            FprScheme::Monkey => 2.min(engine.max_levels),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a11);
        let agents = (1..=trained)
            .map(|level| LevelAgent {
                level,
                ac: ActorCritic::new(cfg.ddpg(), &mut rng),
                buffer: ReplayBuffer::new(cfg.buffer_capacity),
                noise: cfg.noise_sigma,
                prev: None,
                policies: VecDeque::new(),
                outputs: VecDeque::new(),
                scale_sum: 0.0,
                scale_n: 0,
                steps: 0,
                converged: false,
            })
            .collect();
        Ok(LerpTuner {
            cfg,
            transition,
            size_ratio: engine.size_ratio,
            max_levels: engine.max_levels,
            scheme,
            agents,
            phase: 0,
            rng,
            gamma_ema: None,
            mission: 0,
            since_decision: 0,
            converged_at: None,
            history: Vec::new(),
        })
    }

    pub fn history(&self) -> &[TunerStep] {
        &self.history
    }

    pub fn is_converged(&self) -> bool {
        self.phase >= self.agents.len()
    }

    pub fn actor_critic(&self, level: usize) -> Option<&ActorCritic> {
        self.agents.iter().find(|a| a.level == level).map(|a| &a.ac)
    }

    fn set_level(&self, tree: &mut FlsmTree, level: usize, k: usize) -> Result<()> {
        let current = tree.level(level).map(|l| l.policy());
        if current == Some(k) && tree.level(level).and_then(|l| l.pending_policy()).is_none() {
            return Ok(());
        }
        tree.apply_transition(TransitionRequest {
            level,
            new_policy: k,
            kind: self.transition,
        })
    }

    /// Under a uniform layout every level follows Level 1.
    fn mirror(&self, tree: &mut FlsmTree, k: usize) -> Result<()> {
        for level in 2..=tree.level_count() {
            self.set_level(tree, level, k)?;
        }
        tree.set_default_policy(k)
    }

    fn policy_of(tree: &FlsmTree, level: usize) -> usize {
        tree.level(level).map_or(tree.default_policy(), |l| l.policy())
    }

    fn finish(&mut self, tree: &mut FlsmTree) -> Result<()> {
        match self.scheme {
            FprScheme::Uniform => self.mirror(tree, Self::policy_of(tree, 1)),
            FprScheme::Monkey => {
                let k1 = Self::policy_of(tree, 1);
                let k2 = Self::policy_of(tree, 2).min(k1);
                let all = propagate_all(k1, k2, self.size_ratio, self.max_levels)?;
                for (j, &k) in all.iter().enumerate() {
                    if j < tree.level_count() {
                        self.set_level(tree, j + 1, k)?;
                    }
                }
                tree.set_default_policy(*all.last().unwrap_or(&k1))
            }
        }
    }

    fn restart_all(&mut self) {
        self.phase = 0;
        self.since_decision = 0;
        self.converged_at = None;
        let sigma = self.cfg.noise_sigma;
        for a in &mut self.agents {
            a.restart(sigma, ActorCritic::new(self.cfg.ddpg(), &mut self.rng));
        }
    }
}

fn variance(xs: &VecDeque<f64>) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

impl Controller for LerpTuner {
    fn start(&mut self, tree: &mut FlsmTree) -> Result<()> {
        if let Some(k) = self.cfg.start_policy {
            tree.set_default_policy(k)?;
            for level in 1..=tree.level_count() {
                tree.apply_flexible(level, k)?;
            }
        }
        Ok(())
    }

    fn end_of_mission(&mut self, stats: &MissionStats, tree: &mut FlsmTree) -> Result<Decision> {
        let mission = self.mission;
        self.mission += 1;

        let gamma = stats.gamma();
        let shifted = self
            .gamma_ema
            .is_some_and(|e| (gamma - e).abs() > self.cfg.shift_threshold);
        if shifted {
            self.restart_all();
            self.gamma_ema = Some(gamma);
        } else {
            self.gamma_ema = Some(self.gamma_ema.map_or(gamma, |e| 0.9 * e + 0.1 * gamma));
        }
        if self.is_converged() {
            return Ok(Decision::default());
        }
        self.since_decision += 1;
        if self.since_decision < self.cfg.decision_interval {
            return Ok(Decision::default());
        }
        self.since_decision = 0;

        let cfg = self.cfg.clone();
        let size_ratio = self.size_ratio;
        let phase = self.phase;
        let agent = &mut self.agents[phase];
        let level = agent.level;

        let state = LevelState::observe(stats, tree, level);
        let t_level = stats.level_latency_per_op(level);
        let t_prime = stats.latency_per_op();
        let combined = cfg.alpha * t_level + (1.0 - cfg.alpha) * t_prime;
        if agent.scale_n < cfg.scale_missions {
            agent.scale_sum += combined;
            agent.scale_n += 1;
        }
        let scale = (agent.scale_sum / agent.scale_n as f64).max(f64::MIN_POSITIVE);
        let r = reward(t_level, t_prime, cfg.alpha, scale).clamp(-cfg.reward_clip, 0.0);

        if let Some((s, a)) = agent.prev.take() {
            agent.buffer.push(ExperienceSample {
                state: s,
                action: a,
                reward: r,
                next_state: state,
            });
        }
        let mut report = None;
        if agent.buffer.len() >= cfg.batch_size {
            for _ in 0..cfg.train_steps_per_mission {
                let picked = agent
                    .buffer
                    .sample(&mut self.rng, cfg.batch_size)
                    .expect("buffer holds a batch");
                report = Some(agent.ac.train_step(&Batch::from_samples(&picked)));
            }
        }

        let mu = agent.ac.act(&state.0);
        let action = if agent.steps < cfg.warmup_missions {
            self.rng.random_range(-1.0..=1.0)
        } else {
            let noise = Normal::new(0.0, agent.noise)
                .map(|n| n.sample(&mut self.rng))
                .unwrap_or(0.0);
                (mu + noise).clamp(-1.0, 1.0)
        };
        agent.steps += 1;
        let delta = discretize(action);
        let current = Self::policy_of(tree, level);
        let next = step_policy(current, delta, size_ratio);
        // The critic learns from the step actually taken, which differs from
        // the request at the policy bounds.
        agent.prev = Some((state, next as f64 - current as f64));
        agent.noise = (agent.noise * cfg.noise_decay).max(cfg.noise_floor);

        agent.policies.push_back(next);
        agent.outputs.push_back(mu);
        while agent.policies.len() > cfg.convergence_window {
            agent.policies.pop_front();
            agent.outputs.pop_front();
        }
        let settled = agent.steps > cfg.warmup_missions
            && agent.policies.len() == cfg.convergence_window
            && agent.policies.iter().all(|&k| k == next)
            && variance(&agent.outputs) < cfg.convergence_tolerance;

        self.set_level(tree, level, next)?;
        if settled {
            self.agents[phase].converged = true;
            self.phase += 1;
            if self.is_converged() {
                self.finish(tree)?;
                self.converged_at = Some(mission);
            }
        }

        self.history.push(TunerStep {
            mission,
            level,
            reward: r,
            actor_output: mu,
            delta,
            policy: next,
            report,
        });
        Ok(Decision {
            reward: Some(r),
            action: format!("L{level}:{delta:+}"),
        })
    }

    fn converged_at(&self) -> Option<usize> {
        self.converged_at
    }
}
