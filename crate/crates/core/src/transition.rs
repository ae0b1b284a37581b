//! Compaction-policy transitions on a live level.
//!
//! - Greedy: merge the whole level into the next one now, then reopen it
//!   empty under the new policy.
//! - Lazy: record the new policy and switch at the level's next full-level
//!   compaction. Repeated requests before that compaction keep the latest.
//! - Flexible: switch immediately. Sealed runs stay as they are; only the
//!   active run's capacity changes, and it is sealed at once if it already
//!   holds at least the new capacity. No I/O is charged.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::FlsmTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Greedy,
    Lazy,
    Flexible,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 3] = [
        TransitionKind::Greedy,
        TransitionKind::Lazy,
        TransitionKind::Flexible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::Greedy => "greedy",
            TransitionKind::Lazy => "lazy",
            TransitionKind::Flexible => "flexible",
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransitionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown transition '{s}', expected greedy, lazy or flexible"
                ))
            })
    }
}

/// Change level `level` (1-based) to policy `new_policy` using `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRequest {
    pub level: usize,
    pub new_policy: usize,
    pub kind: TransitionKind,
}

impl FlsmTree {
    fn prepare_transition(&mut self, level: usize, new_policy: usize) -> Result<()> {
        self.config.check_policy(new_policy)?;
        self.check_level(level)?;
        self.ensure_level(level);
        Ok(())
    }

    pub fn apply_transition(&mut self, req: TransitionRequest) -> Result<()> {
        match req.kind {
            TransitionKind::Greedy => self.apply_greedy(req.level, req.new_policy),
            TransitionKind::Lazy => self.apply_lazy(req.level, req.new_policy),
            TransitionKind::Flexible => self.apply_flexible(req.level, req.new_policy),
        }
    }

    pub fn apply_flexible(&mut self, level: usize, new_policy: usize) -> Result<()> {
        self.prepare_transition(level, new_policy)?;
        let l = &mut self.levels[level - 1];
        l.policy = new_policy;
        l.pending_policy = None;
        let cap = l.active_capacity();
        if let Some(active) = l.active.as_mut() {
            active.capacity = cap;
            if !active.is_empty() && active.data_size() >= cap {
                l.seal_active();
            }
        }
        Ok(())
    }

    /// On the deepest allowed level there is no next level, so the data is
    /// rewritten in place as one run under the new policy.
    pub fn apply_greedy(&mut self, level: usize, new_policy: usize) -> Result<()> {
        self.prepare_transition(level, new_policy)?;
        let l = &mut self.levels[level - 1];
        if l.is_empty() {
            l.policy = new_policy;
            l.pending_policy = None;
            return Ok(());
        }
        l.pending_policy = Some(new_policy);
        self.force_compact(level)?;
        Ok(())
    }

    pub fn apply_lazy(&mut self, level: usize, new_policy: usize) -> Result<()> {
        self.prepare_transition(level, new_policy)?;
        let l = &mut self.levels[level - 1];
        l.pending_policy = (new_policy != l.policy).then_some(new_policy);
        Ok(())
    }

    /// Applies `policies[j]` to Level `j + 1` with a flexible transition and
    /// makes the last entry the default for deeper levels created later.
    pub fn set_policies_flexible(&mut self, policies: &[usize]) -> Result<()> {
        for (j, &k) in policies.iter().enumerate() {
            if j < self.levels.len() {
                self.apply_flexible(j + 1, k)?;
            } else {
                self.config.check_policy(k)?;
            }
        }
        if let Some(&last) = policies.last() {
            self.set_default_policy(last)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;

    #[test]
    fn kind_parses_case_insensitively() {
        assert_eq!("Greedy".parse::<TransitionKind>().unwrap(), TransitionKind::Greedy);
        assert_eq!("flexible".parse::<TransitionKind>().unwrap(), TransitionKind::Flexible);
        assert!("eager".parse::<TransitionKind>().is_err());
    }

    #[test]
    fn out_of_range_policy_rejected() {
        let mut t = FlsmTree::new(EngineConfig::default()).unwrap();
        for kind in TransitionKind::ALL {
            let req = TransitionRequest {
                level: 1,
                new_policy: 11,
                kind,
            };
            assert!(matches!(t.apply_transition(req), Err(Error::PolicyOutOfRange { .. })));
            let req = TransitionRequest { new_policy: 0, ..req };
            assert!(t.apply_transition(req).is_err());
        }
        assert!(matches!(t.apply_flexible(8, 2), Err(Error::NoSuchLevel(8))));
    }

    #[test]
    fn lazy_last_writer_wins() {
        let mut t = FlsmTree::new(EngineConfig::default()).unwrap();
        t.apply_lazy(1, 4).unwrap();
        t.apply_lazy(1, 6).unwrap();
        assert_eq!(t.level(1).unwrap().pending_policy(), Some(6));
        assert_eq!(t.level(1).unwrap().policy(), 1);
    }
}
