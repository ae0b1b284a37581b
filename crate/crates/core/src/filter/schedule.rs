use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

/// How false positive rates are spread across levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FprScheme {
    /// Every level gets the same FPR.
    Uniform,
    /// Level `i` gets `T^(i-1)` times the FPR of Level 1.
    Monkey,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprSchedule {
    pub scheme: FprScheme,
    /// FPR of Level 1, in (0, 1).
    pub level1_fpr: f64,
    pub size_ratio: usize,
}

impl FprSchedule {
    pub fn uniform(fpr: f64, size_ratio: usize) -> Self {
        FprSchedule {
            scheme: FprScheme::Uniform,
            level1_fpr: fpr,
            size_ratio,
        }
    }

    pub fn monkey(level1_fpr: f64, size_ratio: usize) -> Self {
        FprSchedule {
            scheme: FprScheme::Monkey,
            level1_fpr,
            size_ratio,
        }
    }

    /// FPR for 1-based `level`, capped at 1.0. A value of 1.0 means runs on
    /// that level carry no filter and every probe is treated as positive.
    pub fn level_fpr(&self, level: usize) -> f64 {
        assert!(level >= 1, "levels are 1-based");
        match self.scheme {
            FprScheme::Uniform => self.level1_fpr.min(1.0),
            FprScheme::Monkey => {
                let growth = (self.size_ratio as f64).powi(level as i32 - 1);
                (self.level1_fpr * growth).min(1.0)
            }
        }
    }
}

/// FPR an optimally configured filter reaches with `bits_per_key` bits.
pub(crate) fn fpr_for_bits_per_key(bits_per_key: f64) -> f64 {
    (-bits_per_key * LN_2 * LN_2).exp()
}

/// Bits per key an optimally configured filter needs for `fpr`.
pub(crate) fn bits_per_key_for_fpr(fpr: f64) -> f64 {
    -fpr.ln() / (LN_2 * LN_2)
}
