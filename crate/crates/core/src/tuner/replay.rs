use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::state::LevelState;

/// One observed transition of a level.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceSample {
    pub state: LevelState,
    /// Applied policy delta in `{-1, 0, 1}`.
    pub action: f64,
    pub reward: f64,
    pub next_state: LevelState,
}

/// Fixed-capacity FIFO of experience samples.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: Vec<ExperienceSample>,
    /// Slot the next push overwrites once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            slots: Vec::with_capacity(capacity),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, sample: ExperienceSample) {
        if self.slots.len() < self.capacity {
            self.slots.push(sample);
        } else {
            self.slots[self.head] = sample;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &ExperienceSample> {
        let (newer, older) = self.slots.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `n` distinct samples drawn uniformly; `None` if fewer are stored.
    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Option<Vec<&ExperienceSample>> {
        if n > self.slots.len() {
            return None;
        }
        Some(
            index::sample(rng, self.slots.len(), n)
                .into_iter()
                .map(|i| &self.slots[i])
                .collect(),
        )
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.head = 0;
    }
}
