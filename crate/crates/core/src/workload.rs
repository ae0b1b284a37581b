//! Deterministic workload generation.
//!
//! A workload is a list of sessions, each a run of missions with a fixed
//! lookup fraction. Keys are integers rendered big-endian into the last
//! eight bytes of a fixed-width key. Keys at or above the key space are
//! never written, so lookups drawn from there always miss.

use std::collections::HashSet;
use std::path::Path;

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeyDistribution {
    #[default]
    Uniform,
    Zipfian {
        #[serde(default = "default_theta")]
        theta: f64,
    },
}

fn default_theta() -> f64 {
    0.99
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSpec {
    pub op_count: usize,
    /// Lookup fraction `gamma`.
    pub lookup_fraction: f64,
    pub key_distribution: KeyDistribution,
    pub key_space: u64,
}

impl Default for SessionSpec {
    fn default() -> Self {
        SessionSpec {
            op_count: 100_000,
            lookup_fraction: 0.5,
            key_distribution: KeyDistribution::Uniform,
            key_space: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub sessions: Vec<SessionSpec>,
    pub mission_size: usize,
    pub seed: u64,
    /// Distinct keys bulk-loaded before the first mission.
    pub preload: usize,
    /// Share of lookups aimed at keys that were never written.
    pub zero_result_fraction: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            sessions: vec![SessionSpec::default()],
            mission_size: 10_000,
            seed: 0,
            preload: 200_000,
            zero_result_fraction: 0.5,
        }
    }
}

/// The five-session dynamic workload: read-heavy, balanced, write-heavy,
/// write-inclined and read-inclined.
pub const DYNAMIC_GAMMAS: [f64; 5] = [0.9, 0.5, 0.1, 0.3, 0.7];

impl WorkloadSpec {
    /// One session of `missions` missions at lookup fraction `gamma`.
    pub fn static_workload(gamma: f64, missions: usize, mission_size: usize) -> Self {
        Self::from_gammas(&[gamma], missions, mission_size)
    }

    /// The five-session dynamic workload with `missions_per_session`
    /// missions in each session.
    pub fn dynamic_5session(missions_per_session: usize, mission_size: usize) -> Self {
        Self::from_gammas(&DYNAMIC_GAMMAS, missions_per_session, mission_size)
    }

    pub fn from_gammas(gammas: &[f64], missions_per_session: usize, mission_size: usize) -> Self {
        WorkloadSpec {
            sessions: gammas
                .iter()
                .map(|&g| SessionSpec {
                    op_count: missions_per_session * mission_size,
                    lookup_fraction: g,
                    ..Default::default()
                })
                .collect(),
            mission_size,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_preload(mut self, preload: usize) -> Self {
        self.preload = preload;
        self
    }

    pub fn with_key_space(mut self, key_space: u64) -> Self {
        for s in &mut self.sessions {
            s.key_space = key_space;
        }
        self
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: WorkloadSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.mission_size == 0 {
            return bad("mission_size must be positive".into());
        }
        if self.sessions.is_empty() {
            return bad("workload needs at least one session".into());
        }
        if !(0.0..=1.0).contains(&self.zero_result_fraction) {
            return bad(format!(
                "zero_result_fraction must lie in [0, 1], got {}",
                self.zero_result_fraction
            ));
        }
        for (i, s) in self.sessions.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.lookup_fraction) {
                return bad(format!(
                    "session {i}: lookup_fraction must lie in [0, 1], got {}",
                    s.lookup_fraction
                ));
            }
            if s.op_count % self.mission_size != 0 {
                return bad(format!(
                    "session {i}: op_count {} is not a multiple of mission_size {}",
                    s.op_count, self.mission_size
                ));
            }
            if s.key_space == 0 {
                return bad(format!("session {i}: key_space must be positive"));
            }
            if let KeyDistribution::Zipfian { theta } = s.key_distribution {
                if !(theta.is_finite() && theta > 0.0) {
                    return bad(format!("session {i}: zipf theta must be positive"));
                }
            }
        }
        if self.preload as u64 > self.sessions[0].key_space {
            return bad(format!(
                "preload {} exceeds key space {}",
                self.preload, self.sessions[0].key_space
            ));
        }
        Ok(())
    }

    pub fn mission_count(&self) -> usize {
        self.sessions.iter().map(|s| s.op_count / self.mission_size).sum()
    }

    /// Session index of every mission, in order.
    pub fn mission_sessions(&self) -> Vec<usize> {
        self.sessions
            .iter()
            .enumerate()
            .flat_map(|(i, s)| std::iter::repeat_n(i, s.op_count / self.mission_size))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Lookup(Vec<u8>),
    Update(Vec<u8>, Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub index: usize,
    pub session: usize,
    pub lookup_fraction: f64,
    pub ops: Vec<Op>,
}

impl Mission {
    pub fn lookups(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Lookup(_))).count()
    }
}

/// Renders key number `n` into a `width`-byte key.
pub fn encode_key(n: u64, width: usize) -> Vec<u8> {
    let mut k = vec![0u8; width];
    let be = n.to_be_bytes();
    let take = width.min(8);
    k[width - take..].copy_from_slice(&be[8 - take..]);
    k
}

/// Value whose leading bytes carry `stamp`.
pub fn encode_value(stamp: u64, width: usize) -> Vec<u8> {
    let mut v = vec![0u8; width];
    let le = stamp.to_le_bytes();
    let take = width.min(8);
    v[..take].copy_from_slice(&le[..take]);
    v
}

enum KeySampler {
    Uniform(u64),
    Zipf(Zipf<f64>),
}

impl KeySampler {
    fn new(dist: KeyDistribution, n: u64) -> Result<Self> {
        Ok(match dist {
            KeyDistribution::Uniform => KeySampler::Uniform(n),
            KeyDistribution::Zipfian { theta } => KeySampler::Zipf(
                Zipf::new(n as f64, theta)
                    .map_err(|e| Error::InvalidConfig(format!("zipf: {e}")))?,
            ),
        })
    }

    /// Value in `0..n`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            KeySampler::Uniform(n) => rng.random_range(0..*n),
            KeySampler::Zipf(z) => z.sample(rng) as u64 - 1,
        }
    }
}

/// Produces the preload and then the missions of a [`WorkloadSpec`].
pub struct WorkloadGenerator {
    spec: WorkloadSpec,
    key_width: usize,
    value_width: usize,
    rng: ChaCha8Rng,
    resident: Vec<u64>,
    resident_set: HashSet<u64>,
    stamp: u64,
    session: usize,
    mission_in_session: usize,
    mission: usize,
}

impl WorkloadGenerator {
    pub fn new(spec: WorkloadSpec, key_width: usize, value_width: usize) -> Result<Self> {
        spec.validate()?;
        if key_width < 8 {
            return Err(Error::InvalidConfig(format!(
                "workload keys need at least 8 bytes, got {key_width}"
            )));
        }
        Ok(WorkloadGenerator {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            key_width,
            value_width,
            resident: Vec::new(),
            resident_set: HashSet::new(),
            stamp: 0,
            session: 0,
            mission_in_session: 0,
            mission: 0,
        })
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    fn value(&mut self) -> Vec<u8> {
        self.stamp += 1;
        encode_value(self.stamp, self.value_width)
    }

    fn note_resident(&mut self, n: u64) {
        if self.resident_set.insert(n) {
            self.resident.push(n);
        }
    }

    /// Distinct uniformly drawn keys to bulk load. Call once, before the
    /// first mission.
    pub fn preload(&mut self) -> Vec<(Vec<u8>, Vec<u8>)> {
        let space = self.spec.sessions[0].key_space;
        let picks = rand::seq::index::sample(&mut self.rng, space as usize, self.spec.preload);
        let mut out = Vec::with_capacity(self.spec.preload);
        for n in picks.into_iter() {
            let n = n as u64;
            self.note_resident(n);
            let v = self.value();
            out.push((encode_key(n, self.key_width), v));
        }
        out
    }

    fn next_mission(&mut self) -> Option<Mission> {
        while self.session < self.spec.sessions.len() {
            let s = &self.spec.sessions[self.session];
            if self.mission_in_session < s.op_count / self.spec.mission_size {
                break;
            }
            self.session += 1;
            self.mission_in_session = 0;
        }
        let s = self.spec.sessions.get(self.session)?.clone();
        let sampler = KeySampler::new(s.key_distribution, s.key_space).ok()?;
        let is_lookup = Bernoulli::new(s.lookup_fraction).ok()?;
        let misses = Bernoulli::new(self.spec.zero_result_fraction).ok()?;
        let mut ops = Vec::with_capacity(self.spec.mission_size);
        for _ in 0..self.spec.mission_size {
            if is_lookup.sample(&mut self.rng) {
                let n = if self.resident.is_empty() || misses.sample(&mut self.rng) {
                    s.key_space + self.rng.random_range(0..s.key_space)
                } else {
                    let i = match &sampler {
                        KeySampler::Uniform(_) => self.rng.random_range(0..self.resident.len()),
                        KeySampler::Zipf(_) => {
                            let z = KeySampler::new(s.key_distribution, self.resident.len() as u64)
                                .ok()?;
                            z.sample(&mut self.rng) as usize
                        }
                    };
                    self.resident[i]
                };
                ops.push(Op::Lookup(encode_key(n, self.key_width)));
            } else {
                let n = sampler.sample(&mut self.rng);
                self.note_resident(n);
                let v = self.value();
                ops.push(Op::Update(encode_key(n, self.key_width), v));
            }
        }
        let m = Mission {
            index: self.mission,
            session: self.session,
            lookup_fraction: s.lookup_fraction,
            ops,
        };
        self.mission += 1;
        self.mission_in_session += 1;
        Some(m)
    }
}

impl Iterator for WorkloadGenerator {
    type Item = Mission;

    fn next(&mut self) -> Option<Mission> {
        self.next_mission()
    }
}
