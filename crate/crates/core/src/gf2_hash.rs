//! Key fingerprinting with a random linear map over GF(2).
//!
//! A key is read as a bit vector (byte `c`, bit `k` is column `8c + k`) and
//! multiplied by a random 128-row matrix. The matrix is split into blocks of
//! eight columns and each block is tabulated over all 256 byte values, so a
//! fingerprint is the XOR of one table entry per key byte. Trailing zero
//! padding contributes nothing, so only the actual key bytes are visited.
//!
//! The top 32 bits of a fingerprint select the bucket. The low 96 bits are six
//! 16-bit lanes whose first and last bits are always zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_128_with_seed;

use crate::error::{Error, Result};

/// Default maximum key length in bytes.
pub const DEFAULT_MAX_KEY_BYTES: usize = 65;

/// Number of 16-bit lanes below the bucket word.
pub const LANES: usize = 6;

/// Bits that may be nonzero in a provable fingerprint: the whole bucket word
/// plus bits 1..=14 of every lane.
pub const FINGERPRINT_MASK: u128 = {
    let mut mask = (u32::MAX as u128) << 96;
    let mut j = 0;
    while j < LANES {
        mask |= 0x7FFE << (16 * j);
        j += 1;
    }
    mask
};

/// Which family of hash functions a build uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HashProviderMode {
    /// Tabulated linear maps plus the random bucket tables.
    Provable,
    /// A seeded mixer; no tables, no guarantee for adversarial key sets.
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fingerprint128(pub u128);

impl Fingerprint128 {
    #[inline]
    pub fn high_word(self) -> u32 {
        (self.0 >> 96) as u32
    }

    /// The `b` most significant bits of the high word. `b = 0` selects the
    /// single bucket 0.
    #[inline]
    pub fn bucket_index(self, b: u32) -> u32 {
        debug_assert!(b <= 32);
        ((self.high_word() as u64) >> (32 - b)) as u32
    }

    /// Lane `j` in `1..=6`; lane 1 is the least significant.
    #[inline]
    pub fn lane(self, j: usize) -> u16 {
        debug_assert!((1..=LANES).contains(&j));
        (self.0 >> (16 * (j - 1))) as u16
    }
}

impl std::fmt::Display for Fingerprint128 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Tabulated random linear map `h'(x) = Ax`.
#[derive(Clone, PartialEq, Eq)]
pub struct LinearMapGF2 {
    tables: Vec<[u128; 256]>,
}

impl std::fmt::Debug for LinearMapGF2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearMapGF2")
            .field("max_key_bytes", &self.tables.len())
            .finish()
    }
}

impl LinearMapGF2 {
    /// Samples a random matrix with `8 * max_key_bytes` columns, masked so
    /// that every fingerprint satisfies [`FINGERPRINT_MASK`].
    pub fn sample(seed: u64, max_key_bytes: usize) -> Self {
        assert!(max_key_bytes >= 1, "max_key_bytes must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<u128> = (0..8 * max_key_bytes)
            .map(|_| rng.random::<u128>() & FINGERPRINT_MASK)
            .collect();
        Self::from_columns(&columns)
    }

    /// Builds the tables for an explicit matrix given column by column;
    /// column `i` is the image of key bit `i`. No masking is applied.
    pub fn from_columns(columns: &[u128]) -> Self {
        let tables = columns
            .chunks(8)
            .map(|block| {
                let mut table = [0u128; 256];
                for v in 1..256usize {
                    let low = v.trailing_zeros() as usize;
                    let col = block.get(low).copied().unwrap_or(0);
                    table[v] = table[v & (v - 1)] ^ col;
                }
                table
            })
            .collect();
        LinearMapGF2 { tables }
    }

    pub(crate) fn from_tables(tables: Vec<[u128; 256]>) -> Self {
        LinearMapGF2 { tables }
    }

    pub fn max_key_bytes(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[[u128; 256]] {
        &self.tables
    }

    pub fn fingerprint(&self, key: &[u8]) -> Result<Fingerprint128> {
        if key.len() > self.tables.len() {
            return Err(Error::KeyTooLong {
                len: key.len(),
                max: self.tables.len(),
            });
        }
        let fp = key
            .iter()
            .zip(&self.tables)
            .fold(0u128, |acc, (&byte, table)| acc ^ table[byte as usize]);
        Ok(Fingerprint128(fp))
    }
}

/// Fingerprint for the heuristic provider: 96 significant bits (the bucket
/// word plus 64 body bits); the low 32 bits are zero.
#[inline]
pub fn heuristic_fingerprint(seed: u32, key: &[u8]) -> Fingerprint128 {
    Fingerprint128(xxh3_128_with_seed(key, seed as u64) & !(u32::MAX as u128))
}
