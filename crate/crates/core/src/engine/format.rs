//! On-disk run format.
//!
//! All integers are little-endian.
//!
//! ```text
//! header   magic "FLSMRUN1" (8) | version u32 | entry_count u64
//!          | key_width u32 | value_width u32 | page_size u32
//!          zero padded to a page boundary
//! data     ceil(entry_count / entries_per_page) pages of page_size bytes;
//!          each entry is key | value | seq u64, pages are zero padded
//! footer   fence keys (key_width bytes per page)
//!          | bloom bit length u64 | bloom bits (ceil(len / 8) bytes)
//!          | hash count u32 | CRC-64/XZ of every preceding byte (u64)
//! ```
//!
//! A run without a filter stores a bit length and hash count of zero.

use std::fs;
use std::path::{Path, PathBuf};

use crc::{Crc, CRC_64_XZ};

use super::run::Entry;
use crate::error::{Error, Result};
use crate::filter::{BloomFilter, FencePointers};

pub const MAGIC: &[u8; 8] = b"FLSMRUN1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;
const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Decoded contents of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub key_width: usize,
    pub value_width: usize,
    pub page_size: usize,
    pub entries: Vec<Entry>,
    pub fences: FencePointers,
    pub bloom: Option<BloomFilter>,
}

fn entry_width(key_width: usize, value_width: usize) -> usize {
    key_width + value_width + 8
}

fn header_region(page_size: usize) -> usize {
    HEADER_LEN.div_ceil(page_size) * page_size
}

pub fn encode(
    entries: &[Entry],
    fences: &FencePointers,
    bloom: Option<&BloomFilter>,
    key_width: usize,
    value_width: usize,
    page_size: usize,
) -> Vec<u8> {
    let width = entry_width(key_width, value_width);
    let per_page = page_size / width;
    assert!(per_page > 0, "entry wider than a page");
    let pages = entries.len().div_ceil(per_page);

    let mut out = Vec::with_capacity(header_region(page_size) + pages * page_size + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    out.extend_from_slice(&(key_width as u32).to_le_bytes());
    out.extend_from_slice(&(value_width as u32).to_le_bytes());
    out.extend_from_slice(&(page_size as u32).to_le_bytes());
    out.resize(header_region(page_size), 0);

    for page in entries.chunks(per_page) {
        let start = out.len();
        for e in page {
            debug_assert_eq!(e.key.len(), key_width);
            debug_assert_eq!(e.value.len(), value_width);
            out.extend_from_slice(&e.key);
            out.extend_from_slice(&e.value);
            out.extend_from_slice(&e.seq.to_le_bytes());
        }
        out.resize(start + page_size, 0);
    }

    for key in fences.keys() {
        out.extend_from_slice(key);
    }
    match bloom {
        Some(b) => {
            out.extend_from_slice(&b.num_bits().to_le_bytes());
            out.extend_from_slice(&b.to_bytes());
            out.extend_from_slice(&b.hash_count().to_le_bytes());
        }
        None => {
            out.extend_from_slice(&0u64.to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes());
        }
    }
    let crc = CHECKSUM.checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.buf.len())
            .ok_or_else(|| Error::Corrupt("truncated run file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<RunFile> {
    if bytes.len() < HEADER_LEN + 8 {
        return Err(Error::Corrupt("run file shorter than its header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if CHECKSUM.checksum(body) != stored {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported version {version}")));
    }
    let count = r.u64()? as usize;
    let key_width = r.u32()? as usize;
    let value_width = r.u32()? as usize;
    let page_size = r.u32()? as usize;
    let width = entry_width(key_width, value_width);
    if page_size == 0 || width > page_size {
        return Err(Error::Corrupt("entry wider than a page".into()));
    }
    let per_page = page_size / width;
    let pages = count.div_ceil(per_page);
    r.pos = header_region(page_size);

    let mut entries = Vec::with_capacity(count);
    for page in 0..pages {
        let raw = r.take(page_size)?;
        let n = per_page.min(count - page * per_page);
        for chunk in raw.chunks_exact(width).take(n) {
            let (key, rest) = chunk.split_at(key_width);
            let (value, seq) = rest.split_at(value_width);
            entries.push(Entry {
                key: key.into(),
                value: value.into(),
                seq: u64::from_le_bytes(seq.try_into().unwrap()),
            });
        }
    }

    let fence_keys = (0..pages)
        .map(|_| r.take(key_width).map(Box::from))
        .collect::<Result<Vec<_>>>()?;
    let num_bits = r.u64()?;
    let bloom = if num_bits == 0 {
        r.u32()?;
        None
    } else {
        let bits = r.take(num_bits.div_ceil(8) as usize)?;
        let hash_count = r.u32()?;
        Some(BloomFilter::from_bytes(num_bits, hash_count, bits)?)
    };
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes before checksum".into()));
    }
    Ok(RunFile {
        key_width,
        value_width,
        page_size,
        entries,
        fences: FencePointers::from_keys(fence_keys),
        bloom,
    })
}

/// Directory of persisted run files, one per live run.
#[derive(Debug, Clone)]
pub(crate) struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub(crate) fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(RunStore {
            dir: dir.to_path_buf(),
        })
    }

    pub(crate) fn path(&self, id: u64) -> PathBuf {
        self.dir.join(format!("run-{id:08}.flsm"))
    }

    pub(crate) fn write(&self, id: u64, bytes: &[u8]) -> Result<()> {
        let path = self.path(id);
        fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn remove(&self, id: u64) -> Result<()> {
        let path = self.path(id);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path, e)),
            _ => Ok(()),
        }
    }
}
