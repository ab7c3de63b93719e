//! Binary form of a [`PerfectHashFunction`].
//!
//! ```text
//! header     magic "MPHB", version u16, layout u8, mode u8, provider u8,
//!            bucket bits u8, kappa u16, max key bytes u16, epsilon ppm u32,
//!            n u64, range u64
//! provider   provable: GF(2) tables then bucket tables; heuristic: u32 seed
//! offsets    width u8 (1, 2, 4 or 8) then 2^b little-endian entries
//! buckets    one blob per nonempty bucket, sizes implied by the offsets
//! trailer    xxh3-64 of everything before it
//! ```
//!
//! Integers are little-endian. An empty function (`n = 0`) is the header
//! followed directly by the trailer.
//!
//! A bucket blob is the u32 seed followed by a bit stream padded to a byte.
//! Minimal buckets store `T2` (`2 tau` bits), `T1'` (`n_i` bits) and the rank
//! samples `1..=floor(2 tau / kappa)`, each modulo `2^w` where `w` is 8 for
//! `n_i <= 256` and the bit width of `n_i` otherwise. Plain buckets store `T1`.

use std::io::{Read, Write};

use log::warn;
use xxhash_rust::xxh3::{xxh3_64, Xxh3};

use crate::bits::{BitReader, BitWriter};
use crate::bucket_hash::{BucketHashTables, BucketSeed, TABLE_COUNT, TABLE_LEN};
use crate::error::{Error, Result};
use crate::function::{Hasher, Layout, OffsetArray, PerfectHashFunction};
use crate::gf2_hash::{HashProviderMode, LinearMapGF2};
use crate::internal::{BucketFunction, BucketLayout, Epsilon, Mode};
use crate::rank::RankedBitVector;

pub const MAGIC: [u8; 4] = *b"MPHB";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 34;
const TRAILER_BYTES: usize = 8;
const MAX_BUCKET_BITS: u32 = 28;

/// Below this many keys the provable tables dominate the size.
pub const FIXED_COST_WARNING_KEYS: u64 = 16_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeReport {
    pub total_bytes: u64,
    /// Hash provider tables.
    pub fixed_bytes: u64,
    /// Offsets and bucket blobs.
    pub payload_bytes: u64,
    pub bits_per_key: f64,
    pub bits_per_key_without_fixed: f64,
    pub warning: Option<String>,
}

/// Width in bits of each stored rank sample.
pub fn sample_width(n: usize) -> u32 {
    if n <= 256 {
        8
    } else {
        usize::BITS - n.leading_zeros()
    }
}

/// Bytes of one bucket's blob.
pub fn bucket_blob_bytes(mode: Mode, n: usize, tau: usize, kappa: u32) -> usize {
    if n == 0 {
        return 0;
    }
    let bits = match mode {
        Mode::Mphf => 2 * tau + n + (2 * tau / kappa as usize) * sample_width(n) as usize,
        Mode::Phf => 2 * tau,
    };
    4 + bits.div_ceil(8)
}

/// Smallest of 1, 2, 4, 8 bytes holding `max`.
fn offset_width(max: u64) -> usize {
    match max {
        0..=0xFF => 1,
        0x100..=0xFFFF => 2,
        0x1_0000..=0xFFFF_FFFF => 4,
        _ => 8,
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Xxh3,
    written: u64,
}

impl<W: Write> HashingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes)?;
        self.hasher.update(bytes);
        self.written += bytes.len() as u64;
        Ok(())
    }
}

fn layout_code(layout: Layout) -> u8 {
    match layout {
        Layout::External => 0,
        Layout::Standalone => 1,
    }
}

fn mode_code(mode: Mode) -> u8 {
    match mode {
        Mode::Mphf => 0,
        Mode::Phf => 1,
    }
}

fn provider_code(provider: HashProviderMode) -> u8 {
    match provider {
        HashProviderMode::Provable => 0,
        HashProviderMode::Heuristic => 1,
    }
}

fn encode_bucket(bucket: &BucketFunction, kappa: u32) -> Vec<u8> {
    let mut w = BitWriter::new();
    match bucket.layout() {
        BucketLayout::Minimal { t2, t1c } => {
            w.push_vector(t2.bits());
            w.push_vector(t1c);
            let width = sample_width(bucket.len()) as usize;
            let count = 2 * bucket.tau() / kappa as usize;
            for &s in &t2.samples()[1..=count] {
                w.push_bits(s as u64, width);
            }
        }
        BucketLayout::Plain { t1 } => w.push_vector(t1),
    }
    let mut blob = bucket.seed().to_le_bytes().to_vec();
    blob.extend(w.into_bytes());
    blob
}

/// Writes `f` to `sink`.
pub fn encode<W: Write>(f: &PerfectHashFunction, sink: W) -> Result<EncodeReport> {
    let mut out = HashingWriter {
        inner: sink,
        hasher: Xxh3::new(),
        written: 0,
    };
    let mut header = Vec::with_capacity(HEADER_BYTES);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.push(layout_code(f.layout()));
    header.push(mode_code(f.mode()));
    header.push(provider_code(f.provider()));
    header.push(f.bucket_bits() as u8);
    header.extend_from_slice(&(f.kappa() as u16).to_le_bytes());
    header.extend_from_slice(&(f.max_key_bytes() as u16).to_le_bytes());
    header.extend_from_slice(&f.epsilon().ppm().to_le_bytes());
    header.extend_from_slice(&f.len().to_le_bytes());
    header.extend_from_slice(&f.range().to_le_bytes());
    debug_assert_eq!(header.len(), HEADER_BYTES);
    out.put(&header)?;

    let mut fixed_bytes = 0;
    if !f.is_empty() {
        let before = out.written;
        match f.hasher() {
            Hasher::Provable { map, tables } => {
                let mut buf = Vec::with_capacity(256 * 16);
                for table in map.tables() {
                    buf.clear();
                    table.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
                    out.put(&buf)?;
                }
                for chunk in tables.entries().chunks(TABLE_LEN) {
                    buf.clear();
                    chunk.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
                    out.put(&buf)?;
                }
            }
            Hasher::Heuristic { seed } => out.put(&seed.to_le_bytes())?,
        }
        fixed_bytes = out.written - before;

        let offsets = f.offsets().as_slice();
        let width = offset_width(offsets.last().copied().unwrap_or(0));
        out.put(&[width as u8])?;
        let mut buf = Vec::with_capacity(offsets.len() * width);
        for &o in offsets {
            buf.extend_from_slice(&o.to_le_bytes()[..width]);
        }
        out.put(&buf)?;
        for bucket in f.buckets().iter().filter(|b| !b.is_empty()) {
            out.put(&encode_bucket(bucket, f.kappa()))?;
        }
    }
    let digest = out.hasher.digest();
    out.inner.write_all(&digest.to_le_bytes())?;
    out.inner.flush()?;

    let total_bytes = out.written + TRAILER_BYTES as u64;
    let payload_bytes = total_bytes - HEADER_BYTES as u64 - TRAILER_BYTES as u64 - fixed_bytes;
    let per_key = |bytes: u64| {
        if f.is_empty() {
            0.0
        } else {
            bytes as f64 * 8.0 / f.len() as f64
        }
    };
    let warning = (f.provider() == HashProviderMode::Provable && !f.is_empty() && f.len() < FIXED_COST_WARNING_KEYS)
        .then(|| {
            format!(
                "{} keys is below {FIXED_COST_WARNING_KEYS}; the {fixed_bytes}-byte fixed tables dominate the size",
                f.len()
            )
        });
    if let Some(w) = &warning {
        warn!("{w}");
    }
    Ok(EncodeReport {
        total_bytes,
        fixed_bytes,
        payload_bytes,
        bits_per_key: per_key(total_bytes),
        bits_per_key_without_fixed: per_key(total_bytes - fixed_bytes),
        warning,
    })
}

pub fn to_bytes(f: &PerfectHashFunction) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    encode(f, &mut buf)?;
    Ok(buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < len {
            return Err(Error::format(self.data.len() as u64, "truncated"));
        }
        let bytes = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(bytes)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn uint(&mut self, width: usize) -> Result<u64> {
        let mut buf = [0u8; 8];
        buf[..width].copy_from_slice(self.take(width)?);
        Ok(u64::from_le_bytes(buf))
    }
}

/// Key count of a plain bucket with `tau` vertices per side; `tau` is
/// strictly increasing in the key count, so the inverse is unique.
fn keys_for_tau(epsilon: Epsilon, tau: usize) -> Option<usize> {
    let guess = (tau as u128 * 1_000_000 / (1_000_000 + epsilon.ppm() as u128)) as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&m| epsilon.tau(m) == tau)
}

fn decode_bucket(blob: &[u8], at: usize, mode: Mode, n: usize, tau: usize, kappa: u32) -> Result<BucketFunction> {
    let bad = |reason: &str| Error::format(at as u64, reason.to_string());
    let seed = u32::from_le_bytes(blob[..4].try_into().unwrap());
    if BucketSeed::new(seed).is_none() {
        return Err(bad("bucket seed out of range"));
    }
    let mut r = BitReader::new(&blob[4..]);
    let layout = match mode {
        Mode::Mphf => {
            let t2 = r.read_vector(2 * tau).ok_or_else(|| bad("truncated bucket"))?;
            if t2.count_ones() != n {
                return Err(bad("T2 does not mark one vertex per key"));
            }
            let t1c = r.read_vector(n).ok_or_else(|| bad("truncated bucket"))?;
            let t2 = RankedBitVector::new(t2, kappa);
            let width = sample_width(n);
            let mask = (1u64 << width) - 1;
            let mut prev = 0u64;
            for &expected in &t2.samples()[1..] {
                let stored = r.read_bits(width as usize).ok_or_else(|| bad("truncated bucket"))?;
                // Consecutive samples differ by at most kappa < 2^w.
                let value = prev + (stored.wrapping_sub(prev) & mask);
                if value != expected as u64 {
                    return Err(bad("rank sample does not match T2"));
                }
                prev = value;
            }
            BucketLayout::Minimal { t2, t1c }
        }
        Mode::Phf => BucketLayout::Plain {
            t1: r.read_vector(2 * tau).ok_or_else(|| bad("truncated bucket"))?,
        },
    };
    Ok(BucketFunction { seed, tau, n, layout })
}

/// Reads a function written by [`encode`].
pub fn decode<R: Read>(mut source: R) -> Result<PerfectHashFunction> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    from_bytes(&data)
}

pub fn from_bytes(data: &[u8]) -> Result<PerfectHashFunction> {
    if data.len() < MAGIC.len() || data[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"MPHB\""));
    }
    if data.len() < HEADER_BYTES + TRAILER_BYTES {
        return Err(Error::format(data.len() as u64, "truncated"));
    }
    let body_len = data.len() - TRAILER_BYTES;
    let mut c = Cursor {
        data: &data[..body_len],
        pos: 4,
    };
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let layout = match c.u8()? {
        0 => Layout::External,
        1 => Layout::Standalone,
        _ => return Err(Error::format(6, "unknown layout")),
    };
    let mode = match c.u8()? {
        0 => Mode::Mphf,
        1 => Mode::Phf,
        _ => return Err(Error::format(7, "unknown mode")),
    };
    let provider = match c.u8()? {
        0 => HashProviderMode::Provable,
        1 => HashProviderMode::Heuristic,
        _ => return Err(Error::format(8, "unknown hash provider")),
    };
    let bucket_bits = c.u8()? as u32;
    if bucket_bits > MAX_BUCKET_BITS {
        return Err(Error::format(9, "too many bucket bits"));
    }
    let kappa = c.u16()? as u32;
    if !(1..=255).contains(&kappa) {
        return Err(Error::format(10, "kappa out of range"));
    }
    let max_key_bytes = c.u16()? as usize;
    let epsilon = Epsilon::from_ppm(c.u32()?).ok_or_else(|| Error::format(14, "epsilon is zero"))?;
    let n = c.u64()?;
    let range = c.u64()?;

    let stored = u64::from_le_bytes(data[body_len..].try_into().unwrap());
    let check_digest = || {
        if xxh3_64(&data[..body_len]) != stored {
            Err(Error::format(body_len as u64, "checksum mismatch"))
        } else {
            Ok(())
        }
    };

    if n == 0 {
        if c.pos != body_len {
            return Err(Error::format(c.pos as u64, "trailing bytes after an empty function"));
        }
        check_digest()?;
        let hasher = match provider {
            HashProviderMode::Provable => Hasher::Provable {
                map: LinearMapGF2::from_tables(Vec::new()),
                tables: BucketHashTables::from_entries(vec![0; TABLE_COUNT * TABLE_LEN])?,
            },
            HashProviderMode::Heuristic => Hasher::Heuristic { seed: 0 },
        };
        return Ok(PerfectHashFunction {
            layout,
            mode,
            hasher,
            n,
            range,
            bucket_bits,
            epsilon,
            kappa,
            max_key_bytes,
            offsets: OffsetArray::default(),
            buckets: Vec::new(),
        });
    }

    // Structure first, so a truncated file reports as such; contents are
    // interpreted only after the checksum passes.
    let provider_at = c.pos;
    let provider_bytes = match provider {
        HashProviderMode::Provable => max_key_bytes * 256 * 16 + TABLE_COUNT * TABLE_LEN * 4,
        HashProviderMode::Heuristic => 4,
    };
    let provider_data = c.take(provider_bytes)?;
    let width_at = c.pos;
    let width = c.u8()? as usize;
    if ![1, 2, 4, 8].contains(&width) {
        return Err(Error::format(width_at as u64, "bad offset width"));
    }
    let bucket_count = 1usize << bucket_bits;
    if bucket_count.saturating_mul(width) > body_len - c.pos {
        return Err(Error::format(data.len() as u64, "truncated"));
    }
    let offsets_at = c.pos;
    let mut offsets = Vec::with_capacity(bucket_count);
    for _ in 0..bucket_count {
        offsets.push(c.uint(width)?);
    }
    if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) || *offsets.last().unwrap() > range {
        check_digest()?;
        return Err(Error::format(
            offsets_at as u64,
            "offsets are not nondecreasing within range",
        ));
    }

    let mut shapes = Vec::with_capacity(bucket_count);
    let mut blob_total = 0usize;
    for i in 0..bucket_count {
        let span = offsets.get(i + 1).copied().unwrap_or(range) - offsets[i];
        let (keys, tau) = match mode {
            Mode::Mphf => (span as usize, epsilon.tau(span as usize)),
            Mode::Phf => {
                let tau = (span / 2) as usize;
                match keys_for_tau(epsilon, tau) {
                    Some(keys) if span % 2 == 0 => (keys, tau),
                    _ => {
                        check_digest()?;
                        return Err(Error::format(
                            offsets_at as u64,
                            "offset span is not a valid bucket range",
                        ));
                    }
                }
            }
        };
        blob_total = blob_total.saturating_add(bucket_blob_bytes(mode, keys, tau, kappa));
        shapes.push((keys, tau));
    }
    match (c.pos.saturating_add(blob_total)).cmp(&body_len) {
        std::cmp::Ordering::Greater => return Err(Error::format(data.len() as u64, "truncated")),
        std::cmp::Ordering::Less => {
            check_digest()?;
            return Err(Error::format((c.pos + blob_total) as u64, "trailing bytes"));
        }
        std::cmp::Ordering::Equal => {}
    }
    check_digest()?;

    let hasher = match provider {
        HashProviderMode::Provable => {
            let (map_bytes, table_bytes) = provider_data.split_at(max_key_bytes * 256 * 16);
            let tables = map_bytes
                .chunks_exact(256 * 16)
                .map(|chunk| {
                    let mut table = [0u128; 256];
                    for (v, b) in table.iter_mut().zip(chunk.chunks_exact(16)) {
                        *v = u128::from_le_bytes(b.try_into().unwrap());
                    }
                    table
                })
                .collect();
            let entries = table_bytes
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Hasher::Provable {
                map: LinearMapGF2::from_tables(tables),
                tables: BucketHashTables::from_entries(entries)
                    .map_err(|e| Error::format(provider_at as u64, e.to_string()))?,
            }
        }
        HashProviderMode::Heuristic => Hasher::Heuristic {
            seed: u32::from_le_bytes(provider_data.try_into().unwrap()),
        },
    };

    let mut buckets = Vec::with_capacity(bucket_count);
    let mut keys_total = 0u64;
    for &(keys, tau) in &shapes {
        let len = bucket_blob_bytes(mode, keys, tau, kappa);
        if len == 0 {
            buckets.push(BucketFunction::empty(mode, kappa));
            continue;
        }
        let at = c.pos;
        let blob = c.take(len)?;
        buckets.push(decode_bucket(blob, at, mode, keys, tau, kappa)?);
        keys_total += keys as u64;
    }
    if keys_total != n {
        return Err(Error::format(
            HEADER_BYTES as u64 - 16,
            "key count does not match the buckets",
        ));
    }

    Ok(PerfectHashFunction {
        layout,
        mode,
        hasher,
        n,
        range,
        bucket_bits,
        epsilon,
        kappa,
        max_key_bytes,
        offsets: OffsetArray(offsets),
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::external::{build, build_standalone, BuildConfig, MIN_MEMORY};
    use crate::keys::{KeySource, RandomKeys};

    fn config(dir: &std::path::Path, mode: Mode, provider: HashProviderMode) -> BuildConfig {
        BuildConfig {
            memory: MIN_MEMORY * 4,
            workdir: dir.to_path_buf(),
            mode,
            provider,
            ..Default::default()
        }
    }

    fn assert_same_values(a: &PerfectHashFunction, b: &PerfectHashFunction, keys: &dyn KeySource) {
        keys.for_each_key(&mut |k| {
            assert_eq!(a.evaluate(k).unwrap(), b.evaluate(k).unwrap());
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn sample_widths() {
        assert_eq!(sample_width(1), 8);
        assert_eq!(sample_width(256), 8);
        assert_eq!(sample_width(257), 9);
        assert_eq!(sample_width(1_000_000), 20);
    }

    #[test]
    fn tau_inverse() {
        for ppm in [1, 45_000, 500_000, 1_000_000] {
            let eps = Epsilon::from_ppm(ppm).unwrap();
            for m in 0..2000 {
                assert_eq!(keys_for_tau(eps, eps.tau(m)), Some(m));
            }
        }
    }

    #[test]
    fn roundtrip_across_modes_and_providers() {
        let dir = tempfile::tempdir().unwrap();
        for mode in [Mode::Mphf, Mode::Phf] {
            for provider in [HashProviderMode::Provable, HashProviderMode::Heuristic] {
                for n in [1u64, 1000] {
                    let keys = RandomKeys::new(n, n + 7);
                    let f = build(&keys, &config(dir.path(), mode, provider)).unwrap().function;
                    let g = from_bytes(&to_bytes(&f).unwrap()).unwrap();
                    assert_eq!(f, g, "{mode:?} {provider:?} n={n}");
                    assert_same_values(&f, &g, &RandomKeys::new(500, 1234));
                }
            }
        }
    }

    #[test]
    fn roundtrip_empty() {
        let dir = tempfile::tempdir().unwrap();
        let keys: Vec<&str> = Vec::new();
        let f = build(&keys, &config(dir.path(), Mode::Mphf, HashProviderMode::Provable))
            .unwrap()
            .function;
        let bytes = to_bytes(&f).unwrap();
        assert_eq!(bytes.len(), HEADER_BYTES + TRAILER_BYTES);
        let g = from_bytes(&bytes).unwrap();
        assert_eq!(g.len(), 0);
        assert_eq!(g.evaluate(b"x").unwrap(), 0);
    }

    #[test]
    fn roundtrip_million_keys() {
        let dir = tempfile::tempdir().unwrap();
        let keys = RandomKeys::new(1_000_000, 3);
        let cfg = BuildConfig {
            memory: 64 << 20,
            ..config(dir.path(), Mode::Mphf, HashProviderMode::Provable)
        };
        let f = build(&keys, &cfg).unwrap().function;
        let mut bytes = Vec::new();
        let report = encode(&f, &mut bytes).unwrap();
        assert_eq!(report.total_bytes, bytes.len() as u64);
        assert!(report.warning.is_some());
        let g = decode(bytes.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn roundtrip_standalone() {
        let keys = RandomKeys::new(10_000, 8);
        for mode in [Mode::Mphf, Mode::Phf] {
            let cfg = BuildConfig {
                mode,
                ..Default::default()
            };
            let f = build_standalone(&keys, &cfg).unwrap().function;
            let g = from_bytes(&to_bytes(&f).unwrap()).unwrap();
            assert_eq!(f, g);
        }
    }

    #[test]
    fn size_matches_formula() {
        let dir = tempfile::tempdir().unwrap();
        for mode in [Mode::Mphf, Mode::Phf] {
            let f = build(
                &RandomKeys::new(50_000, 9),
                &config(dir.path(), mode, HashProviderMode::Provable),
            )
            .unwrap()
            .function;
            let report = encode(&f, std::io::sink()).unwrap();
            let fixed = 65 * 256 * 16 + 12 * (1 << 15) * 4;
            let offsets_width = if f.range() < 1 << 16 { 2 } else { 4 };
            let mut blobs = 0u64;
            for b in f.buckets().iter().filter(|b| !b.is_empty()) {
                let (n, tau) = (b.len() as u64, b.tau() as u64);
                let bits = match mode {
                    Mode::Mphf => 2 * tau + n + (2 * tau / 128) * 8,
                    Mode::Phf => 2 * tau,
                };
                blobs += 4 + bits.div_ceil(8);
            }
            let expected = 34 + fixed + 1 + (offsets_width << f.bucket_bits()) + blobs + 8;
            assert_eq!(report.total_bytes, expected, "{mode:?}");
            assert_eq!(report.fixed_bytes, fixed);
        }
    }

    #[test]
    fn corruption_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let f = build(
            &RandomKeys::new(2000, 10),
            &config(dir.path(), Mode::Mphf, HashProviderMode::Heuristic),
        )
        .unwrap()
        .function;
        let bytes = to_bytes(&f).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Format { offset: 0, .. })));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(from_bytes(&bad), Err(Error::Format { offset: 4, .. })));

        let err = from_bytes(&bytes[..bytes.len() - 100]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        for pos in [HEADER_BYTES + 2, bytes.len() / 2, bytes.len() - 9] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(matches!(from_bytes(&bad), Err(Error::Format { .. })), "flip at {pos}");
        }

        let mut longer = bytes.clone();
        longer.insert(bytes.len() - 8, 0);
        assert!(matches!(from_bytes(&longer), Err(Error::Format { .. })));
    }
}
