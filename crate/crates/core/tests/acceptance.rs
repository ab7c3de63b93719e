//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mphb::bits::BitVector;
use mphb::codec::{self, encode};
use mphb::external::{build, build_standalone, choose_bucket_bits, BuildConfig};
use mphb::gf2_hash::{Fingerprint128, HashProviderMode, LinearMapGF2};
use mphb::internal::{build_bucket_function, Epsilon, InternalParams, Mode};
use mphb::rank::RankedBitVector;
use mphb::{Error, Hasher, KeySource, PerfectHashFunction, RandomKeys};

type Criterion = (u8, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn workdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn values(f: &PerfectHashFunction, keys: &dyn KeySource) -> Vec<u64> {
    let mut out = Vec::new();
    keys.for_each_key(&mut |k| {
        out.push(f.evaluate(k)?);
        Ok(())
    })
    .expect("evaluation");
    out
}

fn correctness() -> Outcome {
    let dir = workdir();
    let mut notes = Vec::new();
    for (i, n) in [1_000u64, 10_000, 100_000, 1_000_000].into_iter().enumerate() {
        let keys = RandomKeys::new(n, 100 + i as u64);
        for mode in [Mode::Mphf, Mode::Phf] {
            let config = BuildConfig {
                mode,
                workdir: dir.path().to_path_buf(),
                seed: i as u64,
                ..Default::default()
            };
            let f = match build(&keys, &config) {
                Ok(out) => out.function,
                Err(e) => return outcome(false, format!("n={n} {mode:?}: build failed: {e}")),
            };
            let mut seen = BitVector::new(f.range() as usize);
            let mut bad = 0u64;
            let hasher = f.hasher().clone();
            keys.for_each_key(&mut |k| {
                let v = f.evaluate(k)?;
                let in_range = match mode {
                    Mode::Mphf => v < n,
                    Mode::Phf => {
                        let i = hasher.fingerprint(k)?.bucket_index(f.bucket_bits()) as usize;
                        let local = v - f.offsets().as_slice()[i];
                        local < 2 * f.buckets()[i].tau() as u64
                    }
                };
                if !in_range || seen.get(v as usize) {
                    bad += 1;
                } else {
                    seen.set(v as usize, true);
                }
                Ok(())
            })
            .expect("evaluation");
            let onto = mode == Mode::Phf || seen.count_ones() as u64 == n;
            if bad > 0 || !onto {
                return outcome(
                    false,
                    format!("n={n} {mode:?}: {bad} collisions or out-of-range values"),
                );
            }
        }
        notes.push(n.to_string());
    }
    outcome(
        true,
        format!(
            "MPHF bijective onto 0..n and PHF injective for n = {}",
            notes.join(", ")
        ),
    )
}

fn internal_space() -> Outcome {
    let keys = RandomKeys::new(1_000_000, 2);
    let mut bits = Vec::new();
    for mode in [Mode::Mphf, Mode::Phf] {
        let config = BuildConfig {
            mode,
            ..Default::default()
        };
        let f = match build_standalone(&keys, &config) {
            Ok(out) => out.function,
            Err(e) => return outcome(false, format!("{mode:?}: build failed: {e}")),
        };
        let report = encode(&f, std::io::sink()).expect("encode");
        bits.push(report.bits_per_key);
    }
    let pass = bits[0] <= 3.45 && bits[1] <= 2.2;
    outcome(
        pass,
        format!(
            "standalone n=1e6: MPHF {:.4} bits/key (<= 3.45), PHF {:.4} bits/key (<= 2.2)",
            bits[0], bits[1]
        ),
    )
}

fn external_space() -> Outcome {
    let dir = workdir();
    let keys = RandomKeys::new(1_000_000, 3);
    let mut bits = Vec::new();
    for mode in [Mode::Mphf, Mode::Phf] {
        let config = BuildConfig {
            mode,
            bucket_bits: Some(13),
            workdir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let out = match build(&keys, &config) {
            Ok(out) => out,
            Err(e) => return outcome(false, format!("{mode:?}: build failed: {e}")),
        };
        if out.function.bucket_bits() != 13 {
            return outcome(
                false,
                format!("{mode:?}: bucket bits moved to {}", out.function.bucket_bits()),
            );
        }
        let report = encode(&out.function, std::io::sink()).expect("encode");
        bits.push(report.bits_per_key_without_fixed);
    }
    let pass = (3.5..=4.1).contains(&bits[0]) && (2.4..=2.9).contains(&bits[1]);
    outcome(
        pass,
        format!(
            "n=1e6 b=13 excluding fixed tables: MPHF {:.4} bits/key in [3.5, 4.1], PHF {:.4} in [2.4, 2.9]",
            bits[0], bits[1]
        ),
    )
}

fn acyclicity() -> Outcome {
    let hasher = Hasher::sample(HashProviderMode::Provable, 4, 65);
    let params = InternalParams {
        epsilon: Epsilon::from_f64(0.045).unwrap(),
        ..Default::default()
    };
    let keys = RandomKeys::new(256 * 6000, 4);
    let mut fps = Vec::with_capacity(256);
    let mut buckets = 0u64;
    let mut attempts = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failure = None;
    keys.for_each_key(&mut |k| {
        if attempts >= 10_000 {
            return Ok(());
        }
        fps.push(hasher.fingerprint(k)?);
        if fps.len() == 256 {
            fps.sort_unstable();
            match build_bucket_function(&fps, |fp, s, r| hasher.pair(fp, s, r), &params, &mut rng) {
                Ok((_, tries)) => {
                    buckets += 1;
                    attempts += tries as u64;
                }
                Err(e) => failure = Some(e.to_string()),
            }
            fps.clear();
        }
        Ok(())
    })
    .expect("fingerprinting");
    if let Some(e) = failure {
        return outcome(false, format!("bucket build failed: {e}"));
    }
    let rate = buckets as f64 / attempts as f64;
    let mean = attempts as f64 / buckets as f64;
    let pass = attempts >= 10_000 && (0.30..=0.36).contains(&rate) && (2.6..=3.6).contains(&mean);
    outcome(
        pass,
        format!(
            "{attempts} attempts over {buckets} buckets of 256: acceptance {rate:.4} in [0.30, 0.36], mean attempts {mean:.3} in [2.6, 3.6]"
        ),
    )
}

fn scaling() -> Outcome {
    let dir = workdir();
    let sizes = [1_000_000u64, 2_000_000, 4_000_000, 8_000_000];
    let mut totals = Vec::new();
    let mut splits = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        // Median of three runs per size.
        let mut runs: Vec<(Duration, Duration)> = (0..3)
            .map(|trial| {
                let config = BuildConfig {
                    workdir: dir.path().to_path_buf(),
                    seed: trial,
                    ..Default::default()
                };
                let out = build(&RandomKeys::new(n, 50 + i as u64), &config).expect("build");
                (out.stats.partition_time, out.stats.search_time)
            })
            .collect();
        runs.sort_by_key(|(p, s)| *p + *s);
        let (p, s) = runs[1];
        totals.push((p + s).as_secs_f64());
        splits.push(p.as_secs_f64() / (p + s).as_secs_f64());
    }
    let ratios: Vec<f64> = totals.windows(2).map(|w| w[1] / w[0]).collect();
    let pass = ratios.iter().all(|r| (1.7..=2.4).contains(r)) && splits.iter().all(|s| (0.35..=0.65).contains(s));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        pass,
        format!(
            "totals(s) {} ratios {} in [1.7, 2.4]; partition share {} in [0.35, 0.65]",
            fmt(&totals),
            fmt(&ratios),
            fmt(&splits)
        ),
    )
}

fn memory_bound() -> Outcome {
    const MB: usize = 1 << 20;
    let dir = workdir();
    let keys = RandomKeys::new(10_000_000, 6);
    let small = BuildConfig {
        memory: 32 * MB,
        workdir: dir.path().to_path_buf(),
        seed: 6,
        ..Default::default()
    };
    let out = match build(&keys, &small) {
        Ok(out) => out,
        Err(e) => return outcome(false, format!("mu=32MB build failed: {e}")),
    };
    let peak = peak_rss_bytes();
    let spill_files = out.stats.spill_files;
    let small_image = codec::to_bytes(&out.function).expect("encode");
    drop(out);

    let large = BuildConfig {
        memory: 512 * MB,
        ..small.clone()
    };
    let large_image = match build(&keys, &large) {
        Ok(out) => codec::to_bytes(&out.function).expect("encode"),
        Err(e) => return outcome(false, format!("mu=512MB build failed: {e}")),
    };
    let identical = small_image == large_image;
    let limit = (32 + 64) * MB as u64;
    let (peak_ok, peak_text) = match peak {
        Some(p) => (p < limit, format!("{:.1} MB", p as f64 / MB as f64)),
        None => (false, "unavailable".to_string()),
    };
    outcome(
        spill_files >= 2 && identical && peak_ok,
        format!(
            "n=1e7: {spill_files} spill files (>= 2), images identical: {identical}, peak RSS {peak_text} (< 96 MB)"
        ),
    )
}

fn bucket_bits_table() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for n in [100_000u64, 1_000_000, 10_000_000] {
        let b = choose_bucket_bits(n);
        let mut ok = 0;
        let mut worst = 0u32;
        for trial in 0..10u64 {
            let hasher = Hasher::sample(HashProviderMode::Provable, 700 + trial, 65);
            let mut counts = vec![0u32; 1 << b];
            RandomKeys::new(n, 7_000 + trial)
                .for_each_key(&mut |k| {
                    counts[hasher.fingerprint(k)?.bucket_index(b) as usize] += 1;
                    Ok(())
                })
                .expect("fingerprinting");
            let max = *counts.iter().max().unwrap();
            worst = worst.max(max);
            ok += usize::from(max <= 256);
        }
        pass &= ok >= 9;
        notes.push(format!("n={n} b={b}: {ok}/10 (largest {worst})"));
    }

    let dir = workdir();
    let n = 100_000;
    let forced = choose_bucket_bits(n) - 2;
    let config = BuildConfig {
        bucket_bits: Some(forced),
        workdir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let retry = match build(&RandomKeys::new(n, 7), &config) {
        Ok(out) => {
            let retried = out.stats.overflow_retries >= 1 && out.function.bucket_bits() > forced;
            pass &= retried;
            format!(
                "forced b={forced} retried {} time(s) to b={}",
                out.stats.overflow_retries,
                out.function.bucket_bits()
            )
        }
        Err(e) => {
            pass = false;
            format!("forced b={forced} failed: {e}")
        }
    };
    outcome(pass, format!("max bucket <= 256: {}; {retry}", notes.join(", ")))
}

fn gf2_example() -> Outcome {
    // A = [[1,0,1],[0,0,1],[1,1,0]], x = 110, h'(x) = 100 (bit i of a value
    // is row/column i + 1).
    let map = LinearMapGF2::from_columns(&[0b101, 0b100, 0b011]);
    let example = map.fingerprint(&[0b011]).map(|fp| fp.0).unwrap_or(u128::MAX);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..1_000 {
        let len = rng.random_range(1..=16);
        let columns: Vec<u128> = (0..8 * len).map(|_| rng.random()).collect();
        let key: Vec<u8> = (0..rng.random_range(0..=len)).map(|_| rng.random()).collect();
        let naive = (0..128).fold(0u128, |acc, row| {
            let parity = (0..8 * key.len())
                .filter(|&c| key[c / 8] >> (c % 8) & 1 == 1)
                .fold(0, |p, c| p ^ (columns[c] >> row & 1));
            acc | parity << row
        });
        let map = LinearMapGF2::from_columns(&columns);
        if map.fingerprint(&key).ok() != Some(Fingerprint128(naive)) {
            mismatches += 1;
        }
    }
    outcome(
        example == 0b001 && mismatches == 0,
        format!("h'(110) = {example:03b} read LSB-first (expect 001, i.e. 100); {mismatches}/1000 table mismatches"),
    )
}

fn rank_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut probes = 0;
    let mut mismatches = 0;
    while probes < 100_000 {
        let len = rng.random_range(0..5_000);
        let density: f64 = rng.random();
        let bits = BitVector::from_bools((0..len).map(|_| rng.random_bool(density)));
        let kappa = rng.random_range(1..=255);
        let ranked = RankedBitVector::new(bits.clone(), kappa);
        for _ in 0..1_000 {
            let i = rng.random_range(0..=len);
            let naive = (0..i).filter(|&j| bits.get(j)).count();
            mismatches += usize::from(ranked.rank1(i) != naive);
            probes += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over {probes} probes"))
}

fn codec_roundtrip() -> Outcome {
    let dir = workdir();
    let foreign = RandomKeys::new(10_000, 10_000);
    let mut notes = Vec::new();
    let mut corrupt_ok = 0;
    let mut corrupt_total = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in [0u64, 1, 1_000, 1_000_000] {
        let keys = RandomKeys::new(n, 10 + n);
        let config = BuildConfig {
            workdir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let f = build(&keys, &config).expect("build").function;
        let image = codec::to_bytes(&f).expect("encode");
        let g = match codec::from_bytes(&image) {
            Ok(g) => g,
            Err(e) => return outcome(false, format!("n={n}: decode failed: {e}")),
        };
        if values(&f, &keys) != values(&g, &keys) || values(&f, &foreign) != values(&g, &foreign) {
            return outcome(false, format!("n={n}: decoded function answers differently"));
        }
        for _ in 0..100 {
            let mut bad = image.clone();
            if rng.random_bool(0.2) {
                bad.truncate(rng.random_range(0..image.len()));
            } else {
                let pos = rng.random_range(0..bad.len());
                bad[pos] ^= 1 << rng.random_range(0..8);
            }
            corrupt_total += 1;
            corrupt_ok += usize::from(matches!(codec::from_bytes(&bad), Err(Error::Format { .. })));
        }
        notes.push(format!("n={n} ({} bytes)", image.len()));
    }
    outcome(
        corrupt_ok == corrupt_total,
        format!(
            "query-identical after roundtrip for {}; {corrupt_ok}/{corrupt_total} corrupted images rejected",
            notes.join(", ")
        ),
    )
}

fn main() {
    // Memory first, so the peak reading reflects only the small build.
    let criteria: [Criterion; 10] = [
        (6, "memory bound", memory_bound),
        (1, "correctness", correctness),
        (2, "internal-algorithm space", internal_space),
        (3, "external-algorithm space", external_space),
        (4, "acyclicity probability", acyclicity),
        (5, "linear scaling", scaling),
        (7, "bucket-bits table", bucket_bits_table),
        (8, "GF(2) worked example", gf2_example),
        (9, "rank oracle", rank_oracle),
        (10, "codec roundtrip", codec_roundtrip),
    ];
    let mut results = Vec::new();
    for (id, name, run) in criteria {
        let started = Instant::now();
        let o = run();
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
        results.push((id, o.pass));
    }
    results.sort();
    let failed: Vec<String> = results.iter().filter(|r| !r.1).map(|r| r.0.to_string()).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
