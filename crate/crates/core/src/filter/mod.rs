//! Per-run lookup aids: Bloom filters, fence pointers, and the schedule that
//! decides which false positive rate each level's filters are built for.

mod bloom;
mod fence;
mod schedule;

pub use bloom::{BloomFilter, KeyHash};
pub use fence::FencePointers;
pub use schedule::{FprSchedule, FprScheme};

pub(crate) use schedule::{
    bits_per_key_for_fpr as schedule_bits_for_fpr, fpr_for_bits_per_key as schedule_fpr_for_bits,
};
