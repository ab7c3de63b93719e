//! Per-bucket hash pairs derived from a fingerprint and a bucket seed.
//!
//! In provable mode each of the six lanes indexes two random tables: one
//! summed directly and one summed and scaled by the bucket seed, all modulo
//! the largest 32-bit prime. Flipping the (always zero) low lane bit selects
//! the second function of the pair. Heuristic mode replaces the tables with a
//! seeded mixer over the fingerprint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf2_hash::{Fingerprint128, LANES};

/// Largest prime below 2^32.
pub const PRIME: u32 = 4_294_967_291;

/// Entries per table. Lane values have bit 15 clear, so every index reachable
/// with either value of the low bit is below 2^15.
pub const TABLE_LEN: usize = 1 << 15;

pub const TABLE_COUNT: usize = 2 * LANES;

/// Seed `s` of one bucket, in `1..PRIME`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BucketSeed(u32);

impl BucketSeed {
    pub fn new(s: u32) -> Option<Self> {
        (1..PRIME).contains(&s).then_some(BucketSeed(s))
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        BucketSeed(rng.random_range(1..PRIME))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

/// The twelve random tables, flattened: table `j` (0-based) occupies
/// `entries[j * TABLE_LEN .. (j + 1) * TABLE_LEN]`.
#[derive(Clone, PartialEq, Eq)]
pub struct BucketHashTables {
    entries: Vec<u32>,
}

impl std::fmt::Debug for BucketHashTables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BucketHashTables").finish_non_exhaustive()
    }
}

impl BucketHashTables {
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..TABLE_COUNT * TABLE_LEN)
            .map(|_| rng.random_range(0..PRIME))
            .collect();
        BucketHashTables { entries }
    }

    /// Wraps explicit table contents; every entry must be below [`PRIME`].
    pub fn from_entries(entries: Vec<u32>) -> Result<Self> {
        if entries.len() != TABLE_COUNT * TABLE_LEN {
            return Err(Error::Config(format!(
                "expected {} table entries, got {}",
                TABLE_COUNT * TABLE_LEN,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|&e| e >= PRIME) {
            return Err(Error::Config(format!("table entry {pos} is not below p")));
        }
        Ok(BucketHashTables { entries })
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    #[inline]
    fn table(&self, j: usize) -> &[u32] {
        &self.entries[j * TABLE_LEN..(j + 1) * TABLE_LEN]
    }

    /// `(sum_j t_j[y_j ^ delta] + s * sum_j t_{j+6}[y_j ^ delta]) mod p`.
    #[inline]
    pub fn rho(&self, fp: Fingerprint128, s: BucketSeed, delta: bool) -> u32 {
        let d = delta as usize;
        let mut plain = 0u64;
        let mut scaled = 0u64;
        for j in 0..LANES {
            let idx = (fp.lane(j + 1) as usize ^ d) & (TABLE_LEN - 1);
            plain += self.table(j)[idx] as u64;
            scaled += self.table(j + LANES)[idx] as u64;
        }
        let p = PRIME as u64;
        // Both factors are below p < 2^32, so the product fits in a u64;
        // adding another residue still stays below 2^64.
        ((plain % p + s.0 as u64 * (scaled % p)) % p) as u32
    }

    #[inline]
    pub fn hash_pair(&self, fp: Fingerprint128, s: BucketSeed, range: u32) -> (u32, u32) {
        debug_assert!(range >= 1);
        (self.rho(fp, s, false) % range, self.rho(fp, s, true) % range)
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Heuristic counterpart of [`BucketHashTables::hash_pair`], mixing the 96
/// significant fingerprint bits with the seed.
#[inline]
pub fn heuristic_pair(fp: Fingerprint128, s: BucketSeed, range: u32) -> (u32, u32) {
    let body = (fp.0 >> 32) as u64 ^ ((fp.0 >> 96) as u64).rotate_left(29);
    let keyed = mix64(body ^ mix64((s.0 as u64) << 1));
    let first = mix64(keyed ^ 0x9e37_79b9_7f4a_7c15);
    let second = mix64(keyed ^ 0x632b_e59b_d9b4_e019);
    (reduce(first, range), reduce(second, range))
}

#[inline]
fn reduce(h: u64, range: u32) -> u32 {
    ((h as u128 * range as u128) >> 64) as u32
}

/// Outcome of a successful seed search.
#[derive(Debug)]
pub struct SeedSearch<T> {
    pub seed: BucketSeed,
    pub attempts: u32,
    pub accepted: T,
}

/// Draws random seeds until `accept` returns `Some` for the pairs of every
/// fingerprint in `bucket`.
pub fn find_seed<R, P, A, T>(
    bucket: &[Fingerprint128],
    range: u32,
    pair: P,
    mut accept: A,
    rng: &mut R,
    max_attempts: u32,
) -> Result<SeedSearch<T>>
where
    R: Rng,
    P: Fn(Fingerprint128, BucketSeed, u32) -> (u32, u32),
    A: FnMut(&[(u32, u32)]) -> Option<T>,
{
    let mut pairs = Vec::with_capacity(bucket.len());
    for attempt in 1..=max_attempts {
        let seed = BucketSeed::random(rng);
        pairs.clear();
        pairs.extend(bucket.iter().map(|&fp| pair(fp, seed, range)));
        if let Some(accepted) = accept(&pairs) {
            return Ok(SeedSearch {
                seed,
                attempts: attempt,
                accepted,
            });
        }
    }
    Err(Error::SeedSearchExhausted {
        attempts: max_attempts,
        size: bucket.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2_hash::{LinearMapGF2, DEFAULT_MAX_KEY_BYTES};
    use num_bigint::BigUint;

    fn masked_fp(rng: &mut impl Rng) -> Fingerprint128 {
        Fingerprint128(rng.random::<u128>() & crate::gf2_hash::FINGERPRINT_MASK)
    }

    #[test]
    fn prime_is_the_largest_32_bit_prime() {
        let is_prime = |v: u64| v >= 2 && (2..).take_while(|d| d * d <= v).all(|d| !v.is_multiple_of(d));
        assert!(is_prime(PRIME as u64));
        assert!((PRIME as u64 + 1..=u32::MAX as u64).all(|v| !is_prime(v)));
    }

    #[test]
    fn sampled_entries_below_prime() {
        let t = BucketHashTables::sample(1);
        assert!(t.entries().iter().all(|&e| e < PRIME));
        assert_eq!(t, BucketHashTables::sample(1));
    }

    #[test]
    fn zero_tables_give_zero() {
        let t = BucketHashTables::from_entries(vec![0; TABLE_COUNT * TABLE_LEN]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let fp = masked_fp(&mut rng);
            let s = BucketSeed::random(&mut rng);
            assert_eq!(t.rho(fp, s, false), 0);
            assert_eq!(t.rho(fp, s, true), 0);
        }
    }

    #[test]
    fn single_term_sum() {
        let fp = Fingerprint128(0x0000_0000_0000_0000_0000_0000_0000_1234);
        let mut entries = vec![0; TABLE_COUNT * TABLE_LEN];
        entries[0x1234] = 7;
        let t = BucketHashTables::from_entries(entries).unwrap();
        assert_eq!(t.rho(fp, BucketSeed::new(1).unwrap(), false), 7);
        // Delta flips to index 0x1235, which is zero.
        assert_eq!(t.rho(fp, BucketSeed::new(1).unwrap(), true), 0);
    }

    #[test]
    fn rejects_out_of_range_tables() {
        let mut entries = vec![0; TABLE_COUNT * TABLE_LEN];
        entries[5] = PRIME;
        assert!(BucketHashTables::from_entries(entries).is_err());
        assert!(BucketHashTables::from_entries(vec![0; 10]).is_err());
    }

    #[test]
    fn seed_range() {
        assert!(BucketSeed::new(0).is_none());
        assert!(BucketSeed::new(PRIME).is_none());
        assert!(BucketSeed::new(PRIME - 1).is_some());
    }

    #[test]
    fn rho_matches_big_integer_evaluation() {
        let t = BucketHashTables::sample(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let fp = masked_fp(&mut rng);
            let s = BucketSeed::random(&mut rng);
            for delta in [false, true] {
                let mut plain = BigUint::from(0u32);
                let mut scaled = BigUint::from(0u32);
                for j in 0..LANES {
                    let y = ((fp.0 >> (16 * j)) as u16 ^ delta as u16) as usize;
                    plain += BigUint::from(t.entries()[j * TABLE_LEN + y]);
                    scaled += BigUint::from(t.entries()[(j + LANES) * TABLE_LEN + y]);
                }
                let expected = (plain + BigUint::from(s.get()) * scaled) % BigUint::from(PRIME);
                assert_eq!(BigUint::from(t.rho(fp, s, delta)), expected);
            }
        }
    }

    #[test]
    fn hash_pair_reduces_both_values() {
        let t = BucketHashTables::sample(5);
        let fp = Fingerprint128(0x00ab_0000_1110_0000_0000_0002_0000_0004);
        let s = BucketSeed::new(77).unwrap();
        let (a, b) = t.hash_pair(fp, s, 7);
        assert_eq!(a, t.rho(fp, s, false) % 7);
        assert_eq!(b, t.rho(fp, s, true) % 7);
        assert_eq!(t.hash_pair(fp, s, 1), (0, 0));
    }

    #[test]
    fn hash_pairs_are_uniform_over_range() {
        // Chi-square goodness of fit of both coordinates over 268 cells.
        let map = LinearMapGF2::sample(6, DEFAULT_MAX_KEY_BYTES);
        let t = BucketHashTables::sample(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bucket: Vec<Fingerprint128> = (0..256)
            .map(|i| map.fingerprint(format!("key-{i}").as_bytes()).unwrap())
            .collect();
        let range = 268u32;
        let mut counts = vec![0u64; range as usize];
        let seeds = 10_000;
        for _ in 0..seeds {
            let s = BucketSeed::random(&mut rng);
            for &fp in &bucket {
                let (a, b) = t.hash_pair(fp, s, range);
                counts[a as usize] += 1;
                counts[b as usize] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        let expected = total as f64 / range as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let critical = ChiSquared::new((range - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }

    #[test]
    fn pair_collision_rate_close_to_random() {
        // For each seed count colliding (h1, h2) pairs among 256 keys.
        let map = LinearMapGF2::sample(9, DEFAULT_MAX_KEY_BYTES);
        let t = BucketHashTables::sample(10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bucket: Vec<Fingerprint128> = (0..256)
            .map(|i| map.fingerprint(format!("http://host/{i}").as_bytes()).unwrap())
            .collect();
        let range = 268u64;
        let trials = 2000;
        let mut collisions = 0u64;
        for _ in 0..trials {
            let s = BucketSeed::random(&mut rng);
            let mut pairs: Vec<(u32, u32)> = bucket.iter().map(|&fp| t.hash_pair(fp, s, range as u32)).collect();
            pairs.sort_unstable();
            collisions += pairs.windows(2).filter(|w| w[0] == w[1]).count() as u64;
        }
        let key_pairs = 256.0 * 255.0 / 2.0;
        let p = 1.0 / (range * range) as f64;
        let mean = trials as f64 * key_pairs * p;
        let sd = (trials as f64 * key_pairs * p * (1.0 - p)).sqrt();
        assert!(
            (collisions as f64 - mean).abs() <= 3.0 * sd,
            "collisions {collisions}, expected {mean} +- {sd}"
        );
    }

    #[test]
    fn heuristic_pair_in_range_and_seed_dependent() {
        let fp = crate::gf2_hash::heuristic_fingerprint(1, b"abc");
        let (a, b) = heuristic_pair(fp, BucketSeed::new(3).unwrap(), 10);
        assert!(a < 10 && b < 10);
        let differs = (1..50).any(|s| {
            heuristic_pair(fp, BucketSeed::new(s).unwrap(), 1 << 20)
                != heuristic_pair(fp, BucketSeed::new(s + 1).unwrap(), 1 << 20)
        });
        assert!(differs);
        assert_eq!(heuristic_pair(fp, BucketSeed::new(3).unwrap(), 1), (0, 0));
    }

    #[test]
    fn find_seed_single_key_first_attempt() {
        let t = BucketHashTables::sample(12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let found = find_seed(
            &[Fingerprint128(0x1234 << 96)],
            2,
            |fp, s, r| t.hash_pair(fp, s, r),
            |pairs| Some(pairs.len()),
            &mut rng,
            1000,
        )
        .unwrap();
        assert_eq!(found.attempts, 1);
        assert_eq!(found.accepted, 1);
    }

    #[test]
    fn find_seed_exhausts() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut calls = 0;
        let err = find_seed(
            &[Fingerprint128(1)],
            2,
            heuristic_pair,
            |_| {
                calls += 1;
                None::<()>
            },
            &mut rng,
            5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SeedSearchExhausted { attempts: 5, size: 1 }));
        assert_eq!(calls, 5);
    }
}
