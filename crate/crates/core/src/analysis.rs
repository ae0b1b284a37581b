//! Closed-form cost model.
//!
//! Transition costs are in page I/Os, delays in seconds, and per-level costs
//! in the same simulated time units as [`CostModelParams`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::CostModelParams;
use crate::error::{Error, Result};
use crate::transition::TransitionKind;

/// Inputs describing one level at the moment of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionCostInput {
    /// Size ratio `T`.
    pub size_ratio: f64,
    /// Level capacity `C` in bytes.
    pub capacity: f64,
    /// Page size `B` in bytes.
    pub page_size: f64,
    /// Entry size `E` in bytes.
    pub entry_size: f64,
    /// Current policy `K`.
    pub old_policy: f64,
    /// Requested policy `K'`.
    pub new_policy: f64,
    /// Fill fraction `x = D / C`.
    pub fill: f64,
    /// Level false-positive rate `f`.
    pub fpr: f64,
    /// Lookup fraction `gamma`, strictly below 1.
    pub gamma: f64,
    /// Updates per second `N_u`; only used for the lazy delay.
    pub updates_per_sec: f64,
}

impl TransitionCostInput {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCostInput(m));
        let positive = [
            ("T", self.size_ratio),
            ("C", self.capacity),
            ("B", self.page_size),
            ("E", self.entry_size),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, k) in [("K", self.old_policy), ("K'", self.new_policy)] {
            if !(k >= 1.0 && k <= self.size_ratio) {
                return bad(format!("{name} must lie in [1, T], got {k}"));
            }
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return bad(format!("x must lie in [0, 1], got {}", self.fill));
        }
        if !(0.0..=1.0).contains(&self.fpr) {
            return bad(format!("f must lie in [0, 1], got {}", self.fpr));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.updates_per_sec.is_nan() || self.updates_per_sec < 0.0 {
            return bad(format!("N_u must be non-negative, got {}", self.updates_per_sec));
        }
        Ok(())
    }

    /// Extra lookup I/Os per stored entry-slot, `gamma / (1 - gamma)` lookups
    /// per update.
    fn lookups_per_update(&self) -> f64 {
        self.gamma / (1.0 - self.gamma)
    }
}

/// Which expression to use for the flexible additional cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlexibleFormula {
    /// `f C (x - x^2)(K - K') gamma / (E (1 - gamma))`.
    #[default]
    Table,
    /// `f C (1 - x)(K - K') gamma / (E (1 - gamma))`; larger by a factor
    /// `1/x`, kept for comparison.
    Text,
}

/// Extra I/Os of a greedy transition compared with waiting for the level
/// to fill: `T C (1 - x) / (2 B K)`.
pub fn additional_cost_greedy(input: &TransitionCostInput) -> Result<f64> {
    input.validate()?;
    let i = input;
    Ok(i.size_ratio * i.capacity * (1.0 - i.fill) / (2.0 * i.page_size * i.old_policy))
}

/// Extra I/Os of a lazy transition.
pub fn additional_cost_lazy(input: &TransitionCostInput) -> Result<f64> {
    input.validate()?;
    let i = input;
    let (k, kp) = (i.old_policy, i.new_policy);
    Ok(if k > kp {
        i.fpr * i.capacity * (1.0 - i.fill * i.fill) * (k - kp) * i.lookups_per_update()
            / (2.0 * i.entry_size)
    } else if k < kp {
        i.size_ratio * i.capacity * (1.0 - i.fill) * (kp - k) / (2.0 * i.page_size * k * kp)
    } else {
        0.0
    })
}

/// Extra I/Os of a flexible transition; zero unless `K > K'`.
pub fn additional_cost_flexible(input: &TransitionCostInput) -> Result<f64> {
    additional_cost_flexible_with(input, FlexibleFormula::Table)
}

pub fn additional_cost_flexible_with(
    input: &TransitionCostInput,
    formula: FlexibleFormula,
) -> Result<f64> {
    input.validate()?;
    let i = input;
    if i.old_policy <= i.new_policy {
        return Ok(0.0);
    }
    let x = i.fill;
    let shape = match formula {
        FlexibleFormula::Table => x - x * x,
        FlexibleFormula::Text => 1.0 - x,
    };
    Ok(i.fpr * i.capacity * shape * (i.old_policy - i.new_policy) * i.lookups_per_update()
        / i.entry_size)
}

pub fn additional_cost(kind: TransitionKind, input: &TransitionCostInput) -> Result<f64> {
    match kind {
        TransitionKind::Greedy => additional_cost_greedy(input),
        TransitionKind::Lazy => additional_cost_lazy(input),
        TransitionKind::Flexible => additional_cost_flexible(input),
    }
}

/// Amortized `(I/Os, seconds)` spent performing the transition itself.
pub fn transition_cost_and_delay(
    kind: TransitionKind,
    input: &TransitionCostInput,
) -> Result<(f64, f64)> {
    input.validate()?;
    let i = input;
    Ok(match kind {
        TransitionKind::Greedy => (i.capacity / (2.0 * i.page_size), 0.0),
        TransitionKind::Lazy => {
            if i.updates_per_sec <= 0.0 {
                return Err(Error::InvalidCostInput(
                    "lazy delay needs N_u > 0".into(),
                ));
            }
            (0.0, i.capacity / (2.0 * i.updates_per_sec * i.entry_size))
        }
        TransitionKind::Flexible => (0.0, 0.0),
    })
}

/// One row of the transition comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRow {
    pub kind: TransitionKind,
    pub transition_ios: f64,
    pub delay_secs: f64,
    pub additional_ios: f64,
}

pub fn transition_table(input: &TransitionCostInput) -> Result<Vec<TransitionRow>> {
    TransitionKind::ALL
        .into_iter()
        .map(|kind| {
            let (transition_ios, delay_secs) = if kind == TransitionKind::Lazy
                && input.updates_per_sec <= 0.0
            {
                (0.0, f64::INFINITY)
            } else {
                transition_cost_and_delay(kind, input)?
            };
            Ok(TransitionRow {
                kind,
                transition_ios,
                delay_secs,
                additional_ios: additional_cost(kind, input)?,
            })
        })
        .collect()
}

/// Fixed-width text rendering of [`transition_table`], three decimals.
pub fn render_transition_table(rows: &[TransitionRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>16} {:>14} {:>16}",
        "transition", "transition_ios", "delay_s", "additional_ios"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>16.3} {:>14.3} {:>16.3}",
            r.kind.name(),
            r.transition_ios,
            r.delay_secs,
            r.additional_ios
        );
    }
    out
}

/// Inputs of the per-level expected cost per operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCostInput {
    pub policy: f64,
    pub gamma: f64,
    pub size_ratio: f64,
    pub entry_size: f64,
    pub page_size: f64,
    pub fpr: f64,
    pub params: CostModelParams,
}

impl LevelCostInput {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCostInput(m));
        if !(self.size_ratio >= 1.0 && self.entry_size > 0.0 && self.page_size > 0.0) {
            return bad("T, E and B must be positive".into());
        }
        if !(self.policy >= 1.0 && self.policy <= self.size_ratio) {
            return bad(format!("K must lie in [1, T], got {}", self.policy));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.fpr) {
            return bad(format!("f must lie in [0, 1], got {}", self.fpr));
        }
        self.params.validate()
    }

    /// Lookup coefficient `a` and update coefficient `b` of `a K + b / K`.
    fn coefficients(&self) -> (f64, f64) {
        let p = &self.params;
        let a = self.gamma * (self.fpr * p.read_io + p.run_probe_cpu);
        let b = (1.0 - self.gamma)
            * self.size_ratio
            * (self.entry_size / self.page_size * (p.read_io + p.write_io) + p.compact_cpu_per_entry);
        (a, b)
    }
}

/// Expected simulated time per operation spent at one level:
/// `f I_r K g + c_r K g + (T E / (B K))(I_r + I_w)(1 - g) + (T / K) c_w (1 - g)`.
pub fn level_cost(input: &LevelCostInput) -> Result<f64> {
    input.validate()?;
    let (a, b) = input.coefficients();
    Ok(a * input.policy + b / input.policy)
}

/// Real-valued minimizer `sqrt(b / a)`, not clamped; infinite when no
/// lookups reach the level.
pub fn optimal_policy_continuous(input: &LevelCostInput) -> Result<f64> {
    input.validate()?;
    let (a, b) = input.coefficients();
    Ok((b / a).sqrt())
}

/// Best integer policy in `[1, T]`: the cheaper integer neighbour of the
/// continuous optimum, clamped.
pub fn optimal_policy(input: &LevelCostInput) -> Result<usize> {
    let k = optimal_policy_continuous(input)?;
    let t = input.size_ratio.floor();
    let lo = k.floor().clamp(1.0, t);
    let hi = k.ceil().clamp(1.0, t);
    let cost = |k: f64| level_cost(&LevelCostInput { policy: k, ..*input });
    Ok(if cost(hi)? < cost(lo)? { hi } else { lo } as usize)
}

/// Rounds half up to the nearest policy, clamped to `[1, T]`.
pub fn round_policy(k: f64, size_ratio: usize) -> usize {
    let r = (k + 0.5).floor();
    r.clamp(1.0, size_ratio as f64) as usize
}

/// Next level's optimal policy from the two above it:
/// `1 / K_next = sqrt(1 / K_cur^2 + T (1 / K_cur^2 - 1 / K_prev^2))`.
pub fn propagate_policy(k_prev: f64, k_cur: f64, size_ratio: f64) -> Result<f64> {
    if !(k_prev >= 1.0 && k_cur >= 1.0) {
        return Err(Error::InvalidCostInput(format!(
            "policies must be >= 1, got {k_prev} and {k_cur}"
        )));
    }
    if k_cur > k_prev {
        return Err(Error::PropagationOrder {
            prev: k_prev,
            cur: k_cur,
        });
    }
    let inv_cur = 1.0 / (k_cur * k_cur);
    let inv_prev = 1.0 / (k_prev * k_prev);
    let radicand = inv_cur + size_ratio * (inv_cur - inv_prev);
    Ok(1.0 / radicand.sqrt())
}

/// Policies for Levels `1..=levels` from the first two, each deeper entry
/// propagated from the rounded values above it.
pub fn propagate_all(k1: usize, k2: usize, size_ratio: usize, levels: usize) -> Result<Vec<usize>> {
    for k in [k1, k2] {
        if !(1..=size_ratio).contains(&k) {
            return Err(Error::PolicyOutOfRange {
                policy: k,
                size_ratio,
            });
        }
    }
    if k2 > k1 {
        return Err(Error::PropagationOrder {
            prev: k1 as f64,
            cur: k2 as f64,
        });
    }
    let mut out = vec![k1, k2];
    while out.len() < levels {
        let n = out.len();
        let (prev, cur) = (out[n - 2], out[n - 1]);
        let next = if cur == 1 {
            1
        } else {
            round_policy(
                propagate_policy(prev as f64, cur as f64, size_ratio as f64)?,
                size_ratio,
            )
        };
        out.push(next);
    }
    out.truncate(levels);
    Ok(out)
}
