//! Two-step external-memory construction.
//!
//! Partitioning fingerprints the keys in blocks of `memory` bytes, clusters
//! each block by bucket index with an indirect counting sort and writes it to
//! its own spill file. The last block stays in memory. Searching merges the
//! runs with a min-heap keyed by bucket index, so every bucket is assembled in
//! one pass over all files. Each bucket gets its own function and the offset
//! array is accumulated as the buckets go by.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use crate::error::{Error, Result};
use crate::function::{derive_seed, Hasher, Layout, OffsetArray, PerfectHashFunction};
use crate::gf2_hash::{Fingerprint128, HashProviderMode, DEFAULT_MAX_KEY_BYTES};
use crate::internal::{build_bucket_function, BucketFunction, Epsilon, InternalParams, Mode};
use crate::keys::KeySource;

/// Smallest accepted internal memory area.
pub const MIN_MEMORY: usize = 1 << 20;

pub const DEFAULT_MEMORY: usize = 200 << 20;

/// Largest bucket the provable layout supports.
pub const MAX_BUCKET: usize = 256;

const MAX_OVERFLOW_RETRIES: u32 = 3;
const MAX_RESTARTS: u32 = 3;
const MIN_BUFFER_RECORDS: usize = 64;

#[derive(Clone, Debug)]
pub struct BuildConfig {
    /// Bytes of fingerprints held in memory per block.
    pub memory: usize,
    pub max_bucket: usize,
    /// `None` picks the bucket bits from the key count.
    pub bucket_bits: Option<u32>,
    pub epsilon: Epsilon,
    pub kappa: u32,
    pub mode: Mode,
    pub provider: HashProviderMode,
    pub workdir: PathBuf,
    pub seed: u64,
    pub keep_spills: bool,
    pub max_key_bytes: usize,
    pub max_seed_attempts: u32,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            memory: DEFAULT_MEMORY,
            max_bucket: MAX_BUCKET,
            bucket_bits: None,
            epsilon: Epsilon::DEFAULT,
            kappa: 128,
            mode: Mode::Mphf,
            provider: HashProviderMode::Provable,
            workdir: std::env::temp_dir(),
            seed: 0,
            keep_spills: false,
            max_key_bytes: DEFAULT_MAX_KEY_BYTES,
            max_seed_attempts: 1000,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory < MIN_MEMORY {
            return Err(Error::Config(format!(
                "memory area of {} bytes is below the minimum of {MIN_MEMORY} bytes",
                self.memory
            )));
        }
        if self.max_bucket == 0 || self.max_bucket > MAX_BUCKET {
            return Err(Error::Config(format!(
                "maximum bucket size must be in 1..={MAX_BUCKET}, got {}",
                self.max_bucket
            )));
        }
        if !(1..=255).contains(&self.kappa) {
            return Err(Error::Config(format!("kappa must be in 1..=255, got {}", self.kappa)));
        }
        if self.bucket_bits.is_some_and(|b| b > 28) {
            return Err(Error::Config("bucket bits must be at most 28".into()));
        }
        if self.max_key_bytes == 0 || self.max_key_bytes > u16::MAX as usize {
            return Err(Error::Config("maximum key length must be in 1..=65535".into()));
        }
        if self.max_seed_attempts == 0 {
            return Err(Error::Config("seed attempts must be positive".into()));
        }
        Ok(())
    }

    fn internal_params(&self) -> InternalParams {
        InternalParams {
            epsilon: self.epsilon,
            kappa: self.kappa,
            mode: self.mode,
            max_attempts: self.max_seed_attempts,
        }
    }
}

/// Measured smallest `b` keeping buckets at or below 256 keys.
const BUCKET_BITS_TABLE: &[(u64, u32)] = &[
    (10_000, 6),
    (100_000, 9),
    (1_000_000, 13),
    (2_000_000, 14),
    (4_000_000, 15),
    (8_000_000, 16),
    (10_000_000, 16),
    (16_000_000, 17),
    (32_000_000, 18),
    (64_000_000, 19),
    (100_000_000, 20),
    (128_000_000, 20),
    (512_000_000, 22),
    (1_000_000_000, 23),
];

/// Default number of bucket bits for `n` keys, interpolated in `log2 n`
/// between table anchors and rounded up.
pub fn choose_bucket_bits(n: u64) -> u32 {
    let (first_n, first_b) = BUCKET_BITS_TABLE[0];
    if n <= first_n {
        return first_b;
    }
    for pair in BUCKET_BITS_TABLE.windows(2) {
        let ((lo_n, lo_b), (hi_n, hi_b)) = (pair[0], pair[1]);
        if n == hi_n {
            return hi_b;
        }
        if n < hi_n {
            let frac = ((n as f64).log2() - (lo_n as f64).log2()) / ((hi_n as f64).log2() - (lo_n as f64).log2());
            return lo_b + (frac * (hi_b - lo_b) as f64 - 1e-9).ceil() as u32;
        }
    }
    let (last_n, last_b) = *BUCKET_BITS_TABLE.last().unwrap();
    (last_b + ((n as f64 / last_n as f64).log2() - 1e-9).ceil() as u32).min(28)
}

fn encode_record(fp: Fingerprint128, record_bytes: usize, out: &mut [u8]) {
    let bytes = if record_bytes == 16 { fp.0 } else { fp.0 >> 32 }.to_le_bytes();
    out.copy_from_slice(&bytes[..record_bytes]);
}

fn decode_record(bytes: &[u8]) -> Fingerprint128 {
    let mut buf = [0u8; 16];
    buf[..bytes.len()].copy_from_slice(bytes);
    let v = u128::from_le_bytes(buf);
    Fingerprint128(if bytes.len() == 16 { v } else { v << 32 })
}

#[derive(Debug)]
pub struct SpillRun {
    pub path: PathBuf,
    pub records: u64,
}

/// Output of partitioning: bucket-clustered runs on disk plus the last block.
#[derive(Debug)]
pub struct SpillFileSet {
    dir: Option<TempDir>,
    dir_path: PathBuf,
    runs: Vec<SpillRun>,
    retained: Vec<Fingerprint128>,
    record_bytes: usize,
    bucket_bits: u32,
    n: u64,
}

impl SpillFileSet {
    pub fn runs(&self) -> &[SpillRun] {
        &self.runs
    }

    pub fn retained(&self) -> &[Fingerprint128] {
        &self.retained
    }

    pub fn dir(&self) -> &Path {
        &self.dir_path
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bucket_bits(&self) -> u32 {
        self.bucket_bits
    }

    /// Number of runs including the retained block.
    pub fn run_count(&self) -> usize {
        self.runs.len() + usize::from(!self.retained.is_empty())
    }

    pub fn read_run(&self, j: usize) -> Result<Vec<Fingerprint128>> {
        let path = &self.runs[j].path;
        let bytes = fs::read(path).map_err(|e| Error::io_at(path, e))?;
        if bytes.len() % self.record_bytes != 0 {
            return Err(Error::format(bytes.len() as u64, "spill file ends inside a record"));
        }
        Ok(bytes.chunks_exact(self.record_bytes).map(decode_record).collect())
    }

    /// Leaves the spill directory on disk when the set is dropped.
    pub fn keep(&mut self) -> PathBuf {
        if let Some(dir) = self.dir.take() {
            let _ = dir.keep();
        }
        self.dir_path.clone()
    }
}

#[derive(Clone, Debug, Default)]
pub struct PartitionStats {
    pub keys: u64,
    pub spill_files: usize,
    pub bytes_written: u64,
    pub elapsed: Duration,
}

/// Counting sort by bucket index; returns record indices in bucket order.
fn cluster_by_bucket(block: &[Fingerprint128], bucket_bits: u32) -> Vec<u32> {
    let mut starts = vec![0u32; (1usize << bucket_bits) + 1];
    for fp in block {
        starts[fp.bucket_index(bucket_bits) as usize + 1] += 1;
    }
    for i in 1..starts.len() {
        starts[i] += starts[i - 1];
    }
    let mut order = vec![0u32; block.len()];
    for (idx, fp) in block.iter().enumerate() {
        let slot = &mut starts[fp.bucket_index(bucket_bits) as usize];
        order[*slot as usize] = idx as u32;
        *slot += 1;
    }
    order
}

/// In-place MSD radix sort by bucket index, eight bits per pass, so each
/// pass keeps at most 256 write positions live.
fn cluster_in_place(block: &mut [Fingerprint128], bucket_bits: u32) {
    fn pass(block: &mut [Fingerprint128], bucket_bits: u32, sorted_bits: u32) {
        if block.len() < 2 || sorted_bits == bucket_bits {
            return;
        }
        let width = (bucket_bits - sorted_bits).min(8);
        let shift = bucket_bits - sorted_bits - width;
        let mask = (1u32 << width) - 1;
        let digit = |fp: &Fingerprint128| ((fp.bucket_index(bucket_bits) >> shift) & mask) as usize;
        if block.len() <= 64 {
            block.sort_unstable_by_key(|fp| fp.bucket_index(bucket_bits) >> shift);
            return;
        }
        let mut next = vec![0usize; (1 << width) + 1];
        for fp in block.iter() {
            next[digit(fp) + 1] += 1;
        }
        for d in 1..next.len() {
            next[d] += next[d - 1];
        }
        let bounds = next.clone();
        for d in 0..1 << width {
            while next[d] < bounds[d + 1] {
                let target = digit(&block[next[d]]);
                if target == d {
                    next[d] += 1;
                } else {
                    block.swap(next[d], next[target]);
                    next[target] += 1;
                }
            }
        }
        for d in 0..1 << width {
            pass(&mut block[bounds[d]..bounds[d + 1]], bucket_bits, sorted_bits + width);
        }
    }
    pass(block, bucket_bits, 0);
}

fn validate_key(key: &[u8], line: u64) -> Result<()> {
    if key.is_empty() {
        return Err(Error::InvalidKey {
            line,
            reason: "empty key".into(),
        });
    }
    if key.contains(&0) {
        return Err(Error::InvalidKey {
            line,
            reason: "key contains a NUL byte".into(),
        });
    }
    Ok(())
}

fn fingerprint_key(hasher: &Hasher, key: &[u8], line: u64) -> Result<Fingerprint128> {
    validate_key(key, line)?;
    hasher.fingerprint(key).map_err(|e| match e {
        Error::KeyTooLong { len, max } => Error::InvalidKey {
            line,
            reason: format!("key of {len} bytes exceeds the maximum of {max} bytes"),
        },
        other => other,
    })
}

/// Fingerprints every key and writes bucket-clustered runs of at most
/// `config.memory` bytes of fingerprints each. The last run is kept in memory.
pub fn partition_step(
    source: &dyn KeySource,
    hasher: &Hasher,
    bucket_bits: u32,
    config: &BuildConfig,
) -> Result<(SpillFileSet, PartitionStats)> {
    let started = Instant::now();
    fs::create_dir_all(&config.workdir).map_err(|e| Error::io_at(&config.workdir, e))?;
    let dir = tempfile::Builder::new()
        .prefix("mphb-")
        .tempdir_in(&config.workdir)
        .map_err(|e| Error::io_at(&config.workdir, e))?;
    let dir_path = dir.path().to_path_buf();
    let record_bytes = hasher.record_bytes();
    let capacity = (config.memory / std::mem::size_of::<Fingerprint128>()).max(1);

    let mut runs = Vec::new();
    let mut stats = PartitionStats::default();
    let mut block: Vec<Fingerprint128> = Vec::with_capacity(capacity.min(1 << 16));
    let mut line = 0u64;

    let mut flush = |block: &mut Vec<Fingerprint128>, runs: &mut Vec<SpillRun>| -> Result<()> {
        let path = dir_path.join(format!("run-{}.spill", runs.len()));
        let file = File::create(&path).map_err(|e| Error::io_at(&path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        let mut record = [0u8; 16];
        for &idx in &cluster_by_bucket(block, bucket_bits) {
            encode_record(block[idx as usize], record_bytes, &mut record[..record_bytes]);
            out.write_all(&record[..record_bytes])
                .map_err(|e| Error::io_at(&path, e))?;
        }
        out.flush().map_err(|e| Error::io_at(&path, e))?;
        stats.bytes_written += (block.len() * record_bytes) as u64;
        debug!("wrote {} fingerprints to {}", block.len(), path.display());
        runs.push(SpillRun {
            path,
            records: block.len() as u64,
        });
        block.clear();
        Ok(())
    };

    source.for_each_key(&mut |key| {
        line += 1;
        let fp = fingerprint_key(hasher, key, line)?;
        if block.len() == capacity {
            flush(&mut block, &mut runs)?;
        } else if block.len() == block.capacity() {
            block.reserve_exact(block.len().min(capacity - block.len()));
        }
        block.push(fp);
        Ok(())
    })?;

    // The last block never touches disk; clustering it in place avoids a
    // second copy.
    let mut retained = block;
    cluster_in_place(&mut retained, bucket_bits);

    stats.keys = line;
    stats.spill_files = runs.len();
    stats.elapsed = started.elapsed();
    Ok((
        SpillFileSet {
            dir: Some(dir),
            dir_path: dir_path.clone(),
            runs,
            retained,
            record_bytes,
            bucket_bits,
            n: line,
        },
        stats,
    ))
}

/// Buffered sequential reader over one run.
pub struct RunReader {
    source: RunSource,
    refills: u64,
}

enum RunSource {
    File {
        file: File,
        buf: Vec<u8>,
        pos: usize,
        filled: usize,
        record_bytes: usize,
    },
    Memory {
        records: Vec<Fingerprint128>,
        pos: usize,
    },
}

impl RunReader {
    pub fn open(path: &Path, record_bytes: usize, buffer_bytes: usize) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
        let len = (buffer_bytes / record_bytes).max(1) * record_bytes;
        Ok(RunReader {
            source: RunSource::File {
                file,
                buf: vec![0; len],
                pos: 0,
                filled: 0,
                record_bytes,
            },
            refills: 0,
        })
    }

    pub fn in_memory(records: Vec<Fingerprint128>) -> Self {
        RunReader {
            source: RunSource::Memory { records, pos: 0 },
            refills: 0,
        }
    }

    /// Number of times the buffer was refilled from disk.
    pub fn refills(&self) -> u64 {
        self.refills
    }

    pub fn next_fingerprint(&mut self) -> Result<Option<Fingerprint128>> {
        match &mut self.source {
            RunSource::Memory { records, pos } => {
                let fp = records.get(*pos).copied();
                *pos += 1;
                Ok(fp)
            }
            RunSource::File {
                file,
                buf,
                pos,
                filled,
                record_bytes,
            } => {
                if *pos == *filled {
                    *filled = 0;
                    *pos = 0;
                    while *filled < buf.len() {
                        let got = file.read(&mut buf[*filled..])?;
                        if got == 0 {
                            break;
                        }
                        *filled += got;
                    }
                    if *filled == 0 {
                        return Ok(None);
                    }
                    self.refills += 1;
                    if *filled % *record_bytes != 0 {
                        return Err(Error::format(*filled as u64, "spill file ends inside a record"));
                    }
                }
                let fp = decode_record(&buf[*pos..*pos + *record_bytes]);
                *pos += *record_bytes;
                Ok(Some(fp))
            }
        }
    }
}

/// Heap entry `(bucket index, run, fingerprint)`, smallest bucket first.
pub type HeapEntry = Reverse<(u32, usize, Fingerprint128)>;

/// Assembles the bucket at the top of the heap into `out`: pops every run
/// whose head belongs to that bucket, drains the run's following records of
/// the same bucket, and pushes back the first record of a later bucket.
/// Returns the bucket index and the number of heap pops, or `None` when the
/// heap is empty.
pub fn read_bucket(
    heap: &mut BinaryHeap<HeapEntry>,
    runs: &mut [RunReader],
    bucket_bits: u32,
    out: &mut Vec<Fingerprint128>,
) -> Result<Option<(u32, usize)>> {
    let Some(&Reverse((bucket, _, _))) = heap.peek() else {
        return Ok(None);
    };
    let mut pops = 0;
    while let Some(&Reverse((i, j, fp))) = heap.peek() {
        if i != bucket {
            break;
        }
        heap.pop();
        pops += 1;
        out.push(fp);
        while let Some(next) = runs[j].next_fingerprint()? {
            let next_bucket = next.bucket_index(bucket_bits);
            if next_bucket == bucket {
                out.push(next);
            } else {
                if next_bucket < bucket {
                    return Err(Error::format(0, format!("run {j} is not clustered by bucket")));
                }
                heap.push(Reverse((next_bucket, j, next)));
                break;
            }
        }
    }
    Ok(Some((bucket, pops)))
}

#[derive(Clone, Debug, Default)]
pub struct SearchStats {
    pub buckets: u64,
    pub nonempty_buckets: u64,
    pub seed_attempts: u64,
    pub max_bucket: usize,
    pub heap_pops: u64,
    pub buffer_bytes: usize,
    pub buffer_refills: u64,
    pub elapsed: Duration,
}

impl SearchStats {
    pub fn mean_attempts(&self) -> f64 {
        if self.nonempty_buckets == 0 {
            0.0
        } else {
            self.seed_attempts as f64 / self.nonempty_buckets as f64
        }
    }

    /// Fraction of seed attempts whose graph was acyclic.
    pub fn acyclic_rate(&self) -> f64 {
        if self.seed_attempts == 0 {
            0.0
        } else {
            self.nonempty_buckets as f64 / self.seed_attempts as f64
        }
    }
}

fn bucket_rng(run_seed: u64, bucket: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(run_seed, 0x6275_636b_6574_0000 ^ bucket))
}

/// Merges the runs bucket by bucket and builds each bucket's function.
pub fn search_step(
    mut spill: SpillFileSet,
    hasher: &Hasher,
    run_seed: u64,
    config: &BuildConfig,
) -> Result<(PerfectHashFunction, SearchStats)> {
    let started = Instant::now();
    let bucket_bits = spill.bucket_bits;
    let params = config.internal_params();
    let total_runs = spill.run_count().max(1);
    let buffer_bytes = (config.memory / total_runs).max(MIN_BUFFER_RECORDS * spill.record_bytes);

    let mut runs = Vec::with_capacity(total_runs);
    for run in &spill.runs {
        runs.push(RunReader::open(&run.path, spill.record_bytes, buffer_bytes)?);
    }
    runs.push(RunReader::in_memory(std::mem::take(&mut spill.retained)));

    let mut heap = BinaryHeap::with_capacity(runs.len());
    for (j, run) in runs.iter_mut().enumerate() {
        if let Some(fp) = run.next_fingerprint()? {
            heap.push(Reverse((fp.bucket_index(bucket_bits), j, fp)));
        }
    }

    let bucket_count = 1u64 << bucket_bits;
    let mut stats = SearchStats {
        buckets: bucket_count,
        buffer_bytes,
        ..Default::default()
    };
    let mut offsets = Vec::with_capacity(bucket_count as usize);
    let mut buckets = Vec::with_capacity(bucket_count as usize);
    let mut base = 0u64;
    let mut bucket = Vec::with_capacity(config.max_bucket + 1);

    for i in 0..bucket_count {
        bucket.clear();
        if heap.peek().is_some_and(|Reverse((top, _, _))| *top as u64 == i) {
            let (_, pops) = read_bucket(&mut heap, &mut runs, bucket_bits, &mut bucket)?.expect("heap is nonempty");
            stats.heap_pops += pops as u64;
        }
        if bucket.len() > config.max_bucket {
            return Err(Error::BucketOverflow {
                bucket: i as u32,
                size: bucket.len(),
                limit: config.max_bucket,
            });
        }
        stats.max_bucket = stats.max_bucket.max(bucket.len());
        bucket.sort_unstable();
        if let Some(w) = bucket.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateFingerprint {
                fingerprint: w[0].0,
                bucket: i as u32,
            });
        }
        let (function, attempts) = if bucket.is_empty() {
            (BucketFunction::empty(config.mode, config.kappa), 0)
        } else {
            let mut rng = bucket_rng(run_seed, i);
            build_bucket_function(&bucket, |fp, s, r| hasher.pair(fp, s, r), &params, &mut rng)?
        };
        if !bucket.is_empty() {
            stats.nonempty_buckets += 1;
            stats.seed_attempts += attempts as u64;
        }
        offsets.push(base);
        base += function.range() as u64;
        buckets.push(function);
    }
    if !heap.is_empty() {
        return Err(Error::format(0, "runs hold records past the last bucket"));
    }
    stats.buffer_refills = runs.iter().map(RunReader::refills).sum();
    stats.elapsed = started.elapsed();
    if config.keep_spills {
        let kept = spill.keep();
        info!("spill files kept in {}", kept.display());
    }

    let function = PerfectHashFunction {
        layout: Layout::External,
        mode: config.mode,
        hasher: hasher.clone(),
        n: spill.n,
        range: base,
        bucket_bits,
        epsilon: config.epsilon,
        kappa: config.kappa,
        max_key_bytes: config.max_key_bytes,
        offsets: OffsetArray(offsets),
        buckets,
    };
    Ok((function, stats))
}

#[derive(Clone, Debug, Default)]
pub struct BuildStats {
    pub keys: u64,
    pub bucket_bits: u32,
    pub spill_files: usize,
    pub runs: usize,
    pub partition_time: Duration,
    pub search_time: Duration,
    pub seed_attempts: u64,
    pub nonempty_buckets: u64,
    pub max_bucket: usize,
    pub heap_pops: u64,
    pub buffer_bytes: usize,
    pub buffer_refills: u64,
    /// Worst-case seek count: fingerprint bytes divided by the buffer size.
    pub seek_estimate: u64,
    pub restarts: u32,
    pub overflow_retries: u32,
}

impl BuildStats {
    pub fn total_time(&self) -> Duration {
        self.partition_time + self.search_time
    }

    pub fn mean_attempts(&self) -> f64 {
        if self.nonempty_buckets == 0 {
            0.0
        } else {
            self.seed_attempts as f64 / self.nonempty_buckets as f64
        }
    }

    pub fn acyclic_rate(&self) -> f64 {
        if self.seed_attempts == 0 {
            0.0
        } else {
            self.nonempty_buckets as f64 / self.seed_attempts as f64
        }
    }
}

#[derive(Debug)]
pub struct BuildOutput {
    pub function: PerfectHashFunction,
    pub stats: BuildStats,
}

fn empty_function(config: &BuildConfig, layout: Layout, hasher: Hasher) -> PerfectHashFunction {
    PerfectHashFunction {
        layout,
        mode: config.mode,
        hasher,
        n: 0,
        range: 0,
        bucket_bits: 0,
        epsilon: config.epsilon,
        kappa: config.kappa,
        max_key_bytes: config.max_key_bytes,
        offsets: OffsetArray::default(),
        buckets: Vec::new(),
    }
}

/// 1-based lines of every key whose fingerprint is `target`.
fn lines_with_fingerprint(source: &dyn KeySource, hasher: &Hasher, target: u128) -> Result<Vec<u64>> {
    let mut lines = Vec::new();
    let mut line = 0u64;
    source.for_each_key(&mut |key| {
        line += 1;
        if hasher.fingerprint(key)?.0 == target {
            lines.push(line);
        }
        Ok(())
    })?;
    Ok(lines)
}

/// Builds a function for every key of `source` with the external algorithm.
///
/// A bucket above the size limit repartitions with one more bucket bit (at
/// most three times). Duplicate fingerprints and failed seed searches restart
/// with fresh hash functions (at most three times); duplicates that survive
/// are reported by input line.
pub fn build(source: &dyn KeySource, config: &BuildConfig) -> Result<BuildOutput> {
    config.validate()?;
    let n = source.count()?;
    if n == 0 {
        let hasher = Hasher::sample(config.provider, config.seed, config.max_key_bytes);
        return Ok(BuildOutput {
            function: empty_function(config, Layout::External, hasher),
            stats: BuildStats::default(),
        });
    }
    let mut bucket_bits = config.bucket_bits.unwrap_or_else(|| choose_bucket_bits(n));
    let mut stats = BuildStats::default();
    loop {
        let run_seed = derive_seed(config.seed, stats.restarts as u64);
        let hasher = Hasher::sample(config.provider, run_seed, config.max_key_bytes);
        let (spill, partition) = partition_step(source, &hasher, bucket_bits, config)?;
        stats.keys = partition.keys;
        stats.bucket_bits = bucket_bits;
        stats.spill_files = partition.spill_files;
        stats.runs = spill.run_count();
        stats.partition_time += partition.elapsed;
        let search_started = Instant::now();
        match search_step(spill, &hasher, run_seed, config) {
            Ok((function, search)) => {
                stats.search_time += search.elapsed;
                stats.seed_attempts = search.seed_attempts;
                stats.nonempty_buckets = search.nonempty_buckets;
                stats.max_bucket = search.max_bucket;
                stats.heap_pops = search.heap_pops;
                stats.buffer_bytes = search.buffer_bytes;
                stats.buffer_refills = search.buffer_refills;
                stats.seek_estimate = (n * hasher.record_bytes() as u64).div_ceil(search.buffer_bytes as u64);
                return Ok(BuildOutput { function, stats });
            }
            Err(err) => {
                stats.search_time += search_started.elapsed();
                match err {
                    Error::BucketOverflow { bucket, size, .. }
                        if stats.overflow_retries < MAX_OVERFLOW_RETRIES && bucket_bits < 28 =>
                    {
                        warn!(
                            "bucket {bucket} has {size} keys; retrying with {} bucket bits",
                            bucket_bits + 1
                        );
                        stats.overflow_retries += 1;
                        bucket_bits += 1;
                    }
                    Error::DuplicateFingerprint { fingerprint, .. } if stats.restarts >= MAX_RESTARTS => {
                        let lines = lines_with_fingerprint(source, &hasher, fingerprint)?;
                        return Err(Error::DuplicateKeys { lines });
                    }
                    Error::DuplicateFingerprint { .. } | Error::SeedSearchExhausted { .. }
                        if stats.restarts < MAX_RESTARTS =>
                    {
                        warn!("{err}; restarting with new hash functions");
                        stats.restarts += 1;
                    }
                    other => return Err(other),
                }
            }
        }
    }
}

/// Builds a function for an in-memory key set as one bucket with the
/// heuristic hash functions (no partitioning, no size limit).
pub fn build_standalone(source: &dyn KeySource, config: &BuildConfig) -> Result<BuildOutput> {
    if !(1..=255).contains(&config.kappa) {
        return Err(Error::Config(format!("kappa must be in 1..=255, got {}", config.kappa)));
    }
    let mut stats = BuildStats::default();
    loop {
        let run_seed = derive_seed(config.seed, stats.restarts as u64);
        let hasher = Hasher::sample(HashProviderMode::Heuristic, run_seed, config.max_key_bytes);
        let started = Instant::now();
        let mut fps = Vec::with_capacity(source.count()? as usize);
        let mut line = 0u64;
        source.for_each_key(&mut |key| {
            line += 1;
            validate_key(key, line)?;
            fps.push(hasher.fingerprint(key)?);
            Ok(())
        })?;
        fps.sort_unstable();
        stats.partition_time += started.elapsed();
        stats.keys = line;
        if fps.is_empty() {
            return Ok(BuildOutput {
                function: empty_function(config, Layout::Standalone, hasher),
                stats,
            });
        }

        let started = Instant::now();
        let duplicate = fps.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
        let built = match duplicate {
            Some(fp) => Err(Error::DuplicateFingerprint {
                fingerprint: fp.0,
                bucket: 0,
            }),
            None => build_bucket_function(
                &fps,
                |fp, s, r| hasher.pair(fp, s, r),
                &config.internal_params(),
                &mut bucket_rng(run_seed, 0),
            ),
        };
        stats.search_time += started.elapsed();
        match built {
            Ok((bucket, attempts)) => {
                stats.seed_attempts = attempts as u64;
                stats.nonempty_buckets = 1;
                stats.max_bucket = bucket.len();
                let function = PerfectHashFunction {
                    layout: Layout::Standalone,
                    mode: config.mode,
                    hasher,
                    n: line,
                    range: bucket.range() as u64,
                    bucket_bits: 0,
                    epsilon: config.epsilon,
                    kappa: config.kappa,
                    max_key_bytes: config.max_key_bytes,
                    offsets: OffsetArray(vec![0]),
                    buckets: vec![bucket],
                };
                return Ok(BuildOutput { function, stats });
            }
            Err(Error::DuplicateFingerprint { fingerprint, .. }) if stats.restarts >= MAX_RESTARTS => {
                let lines = lines_with_fingerprint(source, &hasher, fingerprint)?;
                return Err(Error::DuplicateKeys { lines });
            }
            Err(err @ (Error::DuplicateFingerprint { .. } | Error::SeedSearchExhausted { .. }))
                if stats.restarts < MAX_RESTARTS =>
            {
                warn!("{err}; restarting with a new seed");
                stats.restarts += 1;
            }
            Err(other) => return Err(other),
        }
    }
}
