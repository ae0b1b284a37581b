use std::f64::consts::LN_2;

use xxhash_rust::xxh3::xxh3_128;

use crate::error::{Error, Result};

/// The pair of 64-bit hashes a key contributes to every filter probe.
///
/// Computed once per lookup and reused for every run the lookup visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyHash {
    h1: u64,
    h2: u64,
}

impl KeyHash {
    pub fn of(key: &[u8]) -> Self {
        let h = xxh3_128(key);
        // An even stride would only ever touch half of a power-of-two table.
        KeyHash {
            h1: h as u64,
            h2: ((h >> 64) as u64) | 1,
        }
    }

    #[inline]
    fn position(&self, probe: u64, num_bits: u64) -> u64 {
        self.h1.wrapping_add(probe.wrapping_mul(self.h2)) % num_bits
    }
}

/// A standard Bloom filter using double hashing for its probe positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    words: Vec<u64>,
    num_bits: u64,
    hash_count: u32,
    inserted: u64,
}

impl BloomFilter {
    /// Sizes a filter for `expected_keys` insertions at `target_fpr` using
    /// `m = -n ln f / (ln 2)^2` bits and `k = round(m/n ln 2)` probes.
    pub fn with_capacity(expected_keys: usize, target_fpr: f64) -> Result<Self> {
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(Error::InvalidFpr(target_fpr));
        }
        if expected_keys == 0 {
            return Err(Error::EmptyFilter);
        }
        let n = expected_keys as f64;
        let num_bits = ((-n * target_fpr.ln()) / (LN_2 * LN_2)).ceil().max(1.0) as u64;
        let hash_count = ((num_bits as f64 / n) * LN_2).round().max(1.0) as u32;
        Ok(Self::with_geometry(num_bits, hash_count))
    }

    /// An empty filter with an explicit bit count and probe count.
    pub fn with_geometry(num_bits: u64, hash_count: u32) -> Self {
        let num_bits = num_bits.max(1);
        BloomFilter {
            words: vec![0; num_bits.div_ceil(64) as usize],
            num_bits,
            hash_count: hash_count.max(1),
            inserted: 0,
        }
    }

    /// Builds a filter containing every key yielded by `keys`.
    pub fn build<'a, I>(keys: I, target_fpr: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u8]>,
        I::IntoIter: ExactSizeIterator,
    {
        let keys = keys.into_iter();
        let mut filter = Self::with_capacity(keys.len(), target_fpr)?;
        for key in keys {
            filter.insert_hash(&KeyHash::of(key));
        }
        Ok(filter)
    }

    pub fn insert(&mut self, key: &[u8]) {
        self.insert_hash(&KeyHash::of(key));
    }

    pub fn insert_hash(&mut self, hash: &KeyHash) {
        for probe in 0..self.hash_count as u64 {
            let bit = hash.position(probe, self.num_bits);
            self.words[(bit / 64) as usize] |= 1 << (bit % 64);
        }
        self.inserted += 1;
    }

    pub fn may_contain(&self, key: &[u8]) -> bool {
        self.may_contain_hash(&KeyHash::of(key))
    }

    #[inline]
    pub fn may_contain_hash(&self, hash: &KeyHash) -> bool {
        (0..self.hash_count as u64).all(|probe| {
            let bit = hash.position(probe, self.num_bits);
            self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0
        })
    }

    pub fn num_bits(&self) -> u64 {
        self.num_bits
    }

    pub fn hash_count(&self) -> u32 {
        self.hash_count
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn bits_per_key(&self) -> f64 {
        self.num_bits as f64 / self.inserted.max(1) as f64
    }

    /// The bit array packed little-endian into `ceil(num_bits / 8)` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let len = self.num_bits.div_ceil(8) as usize;
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(len);
        out
    }

    /// Rebuilds a filter from the serialized bit array; the insertion count is
    /// not persisted and is reported as zero.
    pub fn from_bytes(num_bits: u64, hash_count: u32, bytes: &[u8]) -> Result<Self> {
        if num_bits == 0 || hash_count == 0 {
            return Err(Error::Corrupt("empty bloom geometry".into()));
        }
        if bytes.len() as u64 != num_bits.div_ceil(8) {
            return Err(Error::Corrupt(format!(
                "bloom bit array is {} bytes, expected {}",
                bytes.len(),
                num_bits.div_ceil(8)
            )));
        }
        let mut words = vec![0u64; num_bits.div_ceil(64) as usize];
        for (i, byte) in bytes.iter().enumerate() {
            words[i / 8] |= (*byte as u64) << ((i % 8) * 8);
        }
        Ok(BloomFilter {
            words,
            num_bits,
            hash_count,
            inserted: 0,
        })
    }
}
