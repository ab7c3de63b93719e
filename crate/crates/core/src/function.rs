//! The finished function: hash provider state, offsets and bucket functions.

use crate::bucket_hash::{heuristic_pair, BucketHashTables, BucketSeed};
use crate::error::Result;
use crate::gf2_hash::{heuristic_fingerprint, Fingerprint128, HashProviderMode, LinearMapGF2};
use crate::internal::{BucketFunction, Epsilon, Mode};

/// Global hash functions shared by every bucket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hasher {
    Provable {
        map: LinearMapGF2,
        tables: BucketHashTables,
    },
    Heuristic {
        seed: u32,
    },
}

const MAP_STREAM: u64 = 0x6d61_705f_6766_3221;
const TABLE_STREAM: u64 = 0x7461_626c_6573_5f31;
const MIXER_STREAM: u64 = 0x6d69_7865_725f_7365;

/// Derives independent 64-bit seeds from one build seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Hasher {
    pub fn sample(mode: HashProviderMode, seed: u64, max_key_bytes: usize) -> Self {
        match mode {
            HashProviderMode::Provable => Hasher::Provable {
                map: LinearMapGF2::sample(derive_seed(seed, MAP_STREAM), max_key_bytes),
                tables: BucketHashTables::sample(derive_seed(seed, TABLE_STREAM)),
            },
            HashProviderMode::Heuristic => Hasher::Heuristic {
                seed: derive_seed(seed, MIXER_STREAM) as u32,
            },
        }
    }

    pub fn mode(&self) -> HashProviderMode {
        match self {
            Hasher::Provable { .. } => HashProviderMode::Provable,
            Hasher::Heuristic { .. } => HashProviderMode::Heuristic,
        }
    }

    #[inline]
    pub fn fingerprint(&self, key: &[u8]) -> Result<Fingerprint128> {
        match self {
            Hasher::Provable { map, .. } => map.fingerprint(key),
            Hasher::Heuristic { seed } => Ok(heuristic_fingerprint(*seed, key)),
        }
    }

    #[inline]
    pub fn pair(&self, fp: Fingerprint128, s: BucketSeed, range: u32) -> (u32, u32) {
        match self {
            Hasher::Provable { tables, .. } => tables.hash_pair(fp, s, range),
            Hasher::Heuristic { .. } => heuristic_pair(fp, s, range),
        }
    }

    /// Bytes per fingerprint in spill files.
    pub fn record_bytes(&self) -> usize {
        match self {
            Hasher::Provable { .. } => 16,
            Hasher::Heuristic { .. } => 12,
        }
    }

    /// Bytes of fixed tables stored with the function.
    pub fn fixed_bytes(&self) -> usize {
        match self {
            Hasher::Provable { map, tables } => map.max_key_bytes() * 256 * 16 + tables.entries().len() * 4,
            Hasher::Heuristic { .. } => 4,
        }
    }
}

/// How the function was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Partitioned into `2^b` buckets by the external algorithm.
    External,
    /// One in-memory set hashed as a single bucket.
    Standalone,
}

/// Prefix sums over buckets: key counts for minimal functions, sums of
/// `2 tau_j` for plain ones. Entry `i` is the base of bucket `i`; the total
/// is implicit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OffsetArray(pub(crate) Vec<u64>);

impl OffsetArray {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Span of bucket `i` given the implicit final total.
    pub fn span(&self, i: usize, total: u64) -> u64 {
        self.0.get(i + 1).copied().unwrap_or(total) - self.0[i]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerfectHashFunction {
    pub(crate) layout: Layout,
    pub(crate) mode: Mode,
    pub(crate) hasher: Hasher,
    pub(crate) n: u64,
    pub(crate) range: u64,
    pub(crate) bucket_bits: u32,
    pub(crate) epsilon: Epsilon,
    pub(crate) kappa: u32,
    pub(crate) max_key_bytes: usize,
    pub(crate) offsets: OffsetArray,
    pub(crate) buckets: Vec<BucketFunction>,
}

impl PerfectHashFunction {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn hasher(&self) -> &Hasher {
        &self.hasher
    }

    pub fn provider(&self) -> HashProviderMode {
        self.hasher.mode()
    }

    /// Number of keys in the build set.
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Size of the output range: `n` for minimal functions.
    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn bucket_bits(&self) -> u32 {
        self.bucket_bits
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn max_key_bytes(&self) -> usize {
        self.max_key_bytes
    }

    pub fn offsets(&self) -> &OffsetArray {
        &self.offsets
    }

    pub fn buckets(&self) -> &[BucketFunction] {
        &self.buckets
    }

    /// Hash value of `key`. Keys of the build set map injectively (and, for
    /// minimal functions, onto `0..n`); any other key maps to some value in
    /// range.
    pub fn evaluate(&self, key: &[u8]) -> Result<u64> {
        if self.n == 0 {
            return Ok(0);
        }
        let fp = self.hasher.fingerprint(key)?;
        Ok(self.evaluate_fingerprint(fp))
    }

    pub fn evaluate_fingerprint(&self, fp: Fingerprint128) -> u64 {
        if self.n == 0 {
            return 0;
        }
        let i = fp.bucket_index(self.bucket_bits) as usize;
        let bucket = &self.buckets[i];
        let local = if bucket.is_empty() {
            0
        } else {
            let seed = BucketSeed::new(bucket.seed()).expect("bucket seeds are validated");
            bucket.evaluate_pair(self.hasher.pair(fp, seed, bucket.tau() as u32))
        };
        let value = self.offsets.0[i] + local as u64;
        if value >= self.range {
            value % self.range
        } else {
            value
        }
    }
}
