//! Deduplicating ingestion frontier.
//!
//! Candidate keys (URLs or comment ids) are normalized and tested against a
//! Bloom filter. Keys the filter has not seen are appended to a JSONL intake
//! log and handed downstream; everything else is dropped as a duplicate.
//! Bloom false positives are dropped the same way, so a small fraction of
//! genuinely new items can be lost. That is accepted in exchange for constant
//! memory.

use std::fs::{File, OpenOptions};
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher13;

use crate::error::{Error, Result};

const SNAPSHOT_MAGIC: &[u8; 4] = b"BLMF";
const SNAPSHOT_VERSION: u32 = 1;
const SNAPSHOT_HEADER_LEN: usize = 4 + 4 + 8 + 4 + 8 + 8;

pub const MIN_BITS: u64 = 8;
pub const MAX_HASHES: u32 = 16;

/// Result of [`BloomFilter::check_and_insert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    /// At least one probed bit was zero before the call.
    New,
    /// Every probed bit was already set.
    Duplicate,
}

/// A Bloom filter over string keys.
///
/// The `k` probe positions come from double hashing: two 64-bit SipHash-1-3
/// values `h1`, `h2` keyed from the seed give `h1 + i * h2 (mod m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    bits: Vec<u8>,
    m: u64,
    k: u32,
    seed: u64,
    n_inserted: u64,
    hash_keys: [u64; 4],
}

impl BloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self> {
        if m < MIN_BITS {
            return Err(Error::InvalidParameter(format!(
                "bloom filter needs at least {MIN_BITS} bits, got {m}"
            )));
        }
        if !(1..=MAX_HASHES).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "hash count must be in 1..={MAX_HASHES}, got {k}"
            )));
        }
        let byte_len = usize::try_from(m.div_ceil(8))
            .map_err(|_| Error::InvalidParameter(format!("bit count {m} too large")))?;
        Ok(Self {
            bits: vec![0; byte_len],
            m,
            k,
            seed,
            n_inserted: 0,
            hash_keys: derive_hash_keys(seed),
        })
    }

    pub fn bit_count(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of insert calls that returned [`Insertion::New`].
    pub fn n_inserted(&self) -> u64 {
        self.n_inserted
    }

    /// Number of bits currently set.
    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    /// Analytic false-positive rate `(1 - e^(-k n / m))^k` for `n` inserted keys.
    pub fn expected_fpr(m: u64, k: u32, n: u64) -> f64 {
        let k = f64::from(k);
        (1.0 - (-k * n as f64 / m as f64).exp()).powf(k)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.probes(key).all(|idx| self.get(idx))
    }

    pub fn check_and_insert(&mut self, key: &str) -> Result<Insertion> {
        if key.is_empty() {
            return Err(Error::InvalidParameter("empty bloom filter key".into()));
        }
        let mut fresh = false;
        let (h1, h2) = self.base_hashes(key);
        for i in 0..u64::from(self.k) {
            let idx = probe(h1, h2, i, self.m);
            if !self.get(idx) {
                fresh = true;
                self.set(idx);
            }
        }
        if fresh {
            self.n_inserted += 1;
            Ok(Insertion::New)
        } else {
            Ok(Insertion::Duplicate)
        }
    }

    fn probes(&self, key: &str) -> impl Iterator<Item = u64> + '_ {
        let (h1, h2) = self.base_hashes(key);
        (0..u64::from(self.k)).map(move |i| probe(h1, h2, i, self.m))
    }

    fn base_hashes(&self, key: &str) -> (u64, u64) {
        let [a, b, c, d] = self.hash_keys;
        let mut first = SipHasher13::new_with_keys(a, b);
        first.write(key.as_bytes());
        let mut second = SipHasher13::new_with_keys(c, d);
        second.write(key.as_bytes());
        // an odd step visits distinct positions whenever m is a power of two
        (first.finish(), second.finish() | 1)
    }

    fn get(&self, idx: u64) -> bool {
        self.bits[(idx / 8) as usize] & (1 << (idx % 8)) != 0
    }

    fn set(&mut self, idx: u64) {
        self.bits[(idx / 8) as usize] |= 1 << (idx % 8);
    }

    /// Serializes to the `BLMF` snapshot layout: a little-endian header
    /// followed by `ceil(m/8)` bytes, bit `i` stored at `byte[i/8] >> (i%8)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + self.bits.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.n_inserted.to_le_bytes());
        out.extend_from_slice(&self.bits);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("bloom snapshot: {msg}"));
        if data.len() < SNAPSHOT_HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &data[0..4] != SNAPSHOT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(data[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(data[at..at + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != SNAPSHOT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let m = u64_at(8);
        let k = u32_at(16);
        let seed = u64_at(20);
        let n_inserted = u64_at(28);
        let mut filter = BloomFilter::new(m, k, seed)?;
        let body = &data[SNAPSHOT_HEADER_LEN..];
        if body.len() != filter.bits.len() {
            return Err(bad(&format!(
                "expected {} bit bytes, found {}",
                filter.bits.len(),
                body.len()
            )));
        }
        filter.bits.copy_from_slice(body);
        filter.n_inserted = n_inserted;
        Ok(filter)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut data = Vec::new();
        File::open(path)?.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }
}

fn probe(h1: u64, h2: u64, i: u64, m: u64) -> u64 {
    h1.wrapping_add(i.wrapping_mul(h2)) % m
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_hash_keys(seed: u64) -> [u64; 4] {
    let mut state = seed;
    std::array::from_fn(|_| splitmix64(&mut state))
}

/// A Bloom filter shared between workers.
///
/// Each check-and-insert holds the lock for the whole probe, so concurrent
/// callers offering the same key see exactly one [`Insertion::New`].
#[derive(Debug)]
pub struct SharedBloom {
    inner: Mutex<BloomFilter>,
}

impl SharedBloom {
    pub fn new(filter: BloomFilter) -> Self {
        Self {
            inner: Mutex::new(filter),
        }
    }

    pub fn check_and_insert(&self, key: &str) -> Result<Insertion> {
        self.lock().check_and_insert(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.lock().contains(key)
    }

    /// Copies the filter out; inserts wait while the copy is taken.
    pub fn snapshot(&self) -> BloomFilter {
        self.lock().clone()
    }

    pub fn into_inner(self) -> BloomFilter {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BloomFilter> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Canonical form of a frontier key.
///
/// URLs with a host get a lowercase scheme and host and lose their fragment;
/// the query string is kept verbatim. Anything else (comment ids, opaque
/// keys) is only trimmed.
pub fn normalize_key(key: &str) -> String {
    let key = key.trim();
    match url::Url::parse(key) {
        Ok(mut parsed) if parsed.has_host() => {
            parsed.set_fragment(None);
            parsed.into()
        }
        _ => key.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierItem {
    pub key: String,
    pub payload_path: String,
    pub enqueued_at: DateTime<Utc>,
}

impl FrontierItem {
    pub fn new(
        key: &str,
        payload_path: impl Into<String>,
        enqueued_at: DateTime<Utc>,
    ) -> Result<Self> {
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(Error::InvalidParameter("frontier item key is empty".into()));
        }
        Ok(Self {
            key,
            payload_path: payload_path.into(),
            enqueued_at,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    Accepted,
    RejectedDuplicate,
}

/// Bloom-filtered intake with a durable JSONL log of accepted items.
///
/// If appending to the log fails the key stays marked in the filter, so a
/// retried offer of that item is rejected: ingestion is at-most-once.
#[derive(Debug)]
pub struct Frontier {
    filter: BloomFilter,
    log_path: PathBuf,
}

impl Frontier {
    pub fn new(filter: BloomFilter, log_path: impl Into<PathBuf>) -> Self {
        Self {
            filter,
            log_path: log_path.into(),
        }
    }

    pub fn filter(&self) -> &BloomFilter {
        &self.filter
    }

    pub fn into_filter(self) -> BloomFilter {
        self.filter
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn offer(&mut self, item: &FrontierItem) -> Result<Offer> {
        match self.filter.check_and_insert(&item.key)? {
            Insertion::Duplicate => Ok(Offer::RejectedDuplicate),
            Insertion::New => {
                let mut line = serde_json::to_string(item)?;
                line.push('\n');
                let mut log = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.log_path)?;
                log.write_all(line.as_bytes())?;
                Ok(Offer::Accepted)
            }
        }
    }
}
