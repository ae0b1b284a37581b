use std::cmp::Ordering;

use crate::filter::{BloomFilter, FencePointers, KeyHash};

/// A fixed-width key-value pair stamped with its insertion sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: Box<[u8]>,
    pub value: Box<[u8]>,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunState {
    Active,
    Sealed,
}

/// A sorted run with its filter and fence pointers.
///
/// Only the active run of a level is ever rewritten; once sealed a run is
/// left alone until its whole level is compacted.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub(crate) id: u64,
    pub(crate) state: RunState,
    pub(crate) capacity: u64,
    pub(crate) level: usize,
    pub(crate) entry_size: u64,
    pub(crate) entries_per_page: usize,
    pub(crate) entries: Vec<Entry>,
    pub(crate) bloom: Option<BloomFilter>,
    pub(crate) fences: FencePointers,
}

impl Run {
    /// Builds a run over `entries`, which must be strictly ascending by key.
    /// `fpr >= 1` builds the run without a filter.
    pub(crate) fn build(
        id: u64,
        level: usize,
        capacity: u64,
        entry_size: u64,
        entries_per_page: usize,
        fpr: f64,
        entries: Vec<Entry>,
    ) -> Run {
        debug_assert!(is_strictly_sorted(&entries), "run entries out of order");
        let bloom = if fpr < 1.0 && !entries.is_empty() {
            let mut filter = BloomFilter::with_capacity(entries.len(), fpr)
                .expect("fpr checked to be below 1");
            for e in &entries {
                filter.insert(&e.key);
            }
            Some(filter)
        } else {
            None
        };
        let fences = FencePointers::build(entries.iter().map(|e| &*e.key), entries_per_page);
        Run {
            id,
            state: RunState::Active,
            capacity,
            level,
            entry_size,
            entries_per_page,
            entries,
            bloom,
            fences,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> RunState {
        self.state
    }

    pub fn is_sealed(&self) -> bool {
        self.state == RunState::Sealed
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Bytes of live entries in the run.
    pub fn data_size(&self) -> u64 {
        self.entries.len() as u64 * self.entry_size
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn bloom(&self) -> Option<&BloomFilter> {
        self.bloom.as_ref()
    }

    pub fn fences(&self) -> &FencePointers {
        &self.fences
    }

    /// Filter check; runs without a filter always answer "maybe".
    #[inline]
    pub fn may_contain(&self, hash: &KeyHash) -> bool {
        self.bloom.as_ref().is_none_or(|b| b.may_contain_hash(hash))
    }

    /// Searches the single page the fence pointers select.
    pub fn find(&self, key: &[u8]) -> Option<&Entry> {
        let page = self.fences.locate_page(key)?;
        let per_page = self.entries_per_page;
        let start = page * per_page;
        let end = (start + per_page).min(self.entries.len());
        let slice = &self.entries[start..end];
        slice
            .binary_search_by(|e| (*e.key).cmp(key))
            .ok()
            .map(|i| &slice[i])
    }
}

pub(crate) fn is_strictly_sorted(entries: &[Entry]) -> bool {
    entries.windows(2).all(|w| w[0].key < w[1].key)
}

/// Merges two strictly sorted sequences; on duplicate keys the entry with
/// the higher sequence number survives.
pub(crate) fn merge_two(a: Vec<Entry>, b: Vec<Entry>) -> Vec<Entry> {
    if a.is_empty() {
        return b;
    }
    if b.is_empty() {
        return a;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut a = a.into_iter().peekable();
    let mut b = b.into_iter().peekable();
    loop {
        let ord = match (a.peek(), b.peek()) {
            (Some(x), Some(y)) => x.key.cmp(&y.key),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => break,
        };
        match ord {
            Ordering::Less => out.push(a.next().unwrap()),
            Ordering::Greater => out.push(b.next().unwrap()),
            Ordering::Equal => {
                let x = a.next().unwrap();
                let y = b.next().unwrap();
                out.push(if x.seq >= y.seq { x } else { y });
            }
        }
    }
    out
}

/// Merges any number of sorted sequences pairwise in a balanced tree.
pub(crate) fn merge_all(mut inputs: Vec<Vec<Entry>>) -> Vec<Entry> {
    inputs.retain(|v| !v.is_empty());
    while inputs.len() > 1 {
        let mut next = Vec::with_capacity(inputs.len().div_ceil(2));
        let mut it = inputs.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge_two(a, b)),
                None => next.push(a),
            }
        }
        inputs = next;
    }
    inputs.pop().unwrap_or_default()
}
