use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mphb::bits::BitVector;
use mphb::codec;
use mphb::external::{build, build_standalone, BuildConfig, BuildOutput, DEFAULT_MEMORY};
use mphb::{Epsilon, Error, HashProviderMode, KeyFile, KeySource, Mode, PerfectHashFunction, RandomKeys};

/// Version tag leading every summary line and CSV header comment.
const SUMMARY_VERSION: &str = "mphb-summary/1";
const CSV_HEADER: &str = "n,trial,partition_s,search_s,total_s,bits_per_key,mean_attempts,acyclic_rate";

#[derive(Parser)]
#[command(name = "mphb", version, about = "Build and query minimal perfect hash functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a function from a newline-delimited key file.
    Build(BuildArgs),
    /// Print the hash value of every key read from stdin.
    Query {
        #[arg(long)]
        function: PathBuf,
    },
    /// Check that a function is perfect (and minimal) on a key file.
    Verify {
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Expected mode; a different mode in the file is an error.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Time builds over growing prefixes of a key file.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mphf,
    Phf,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mphf => Mode::Mphf,
            ModeArg::Phf => Mode::Phf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Provable,
    Heuristic,
}

impl From<ProviderArg> for HashProviderMode {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::Provable => HashProviderMode::Provable,
            ProviderArg::Heuristic => HashProviderMode::Heuristic,
        }
    }
}

#[derive(Args, Clone)]
struct BuildOptions {
    #[arg(long, value_enum, default_value = "mphf")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "provable")]
    provider: ProviderArg,
    /// Internal memory in bytes; accepts K, M and G suffixes (powers of 1024).
    #[arg(long, value_parser = parse_bytes, default_value_t = DEFAULT_MEMORY)]
    memory: usize,
    /// `auto` or a fixed number of bucket bits.
    #[arg(long, default_value = "auto")]
    bucket_bits: String,
    #[arg(long, default_value_t = 0.045)]
    epsilon: f64,
    #[arg(long, default_value_t = 128)]
    kappa: u32,
    #[arg(long, env = "MPHB_WORKDIR")]
    workdir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    keep_spills: bool,
    /// Hash the whole set as one in-memory bucket with the heuristic mixer.
    #[arg(long)]
    standalone: bool,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    options: BuildOptions,
}

#[derive(Args)]
struct BenchArgs {
    /// Key file; random URL-like keys are generated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated key counts.
    #[arg(long, value_delimiter = ',', default_value = "1000000,2000000,4000000")]
    sizes: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    trials: u32,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    options: BuildOptions,
}

fn parse_bytes(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (digits, shift) = match s.as_bytes().last().map(u8::to_ascii_uppercase) {
        Some(b'K') => (&s[..s.len() - 1], 10),
        Some(b'M') => (&s[..s.len() - 1], 20),
        Some(b'G') => (&s[..s.len() - 1], 30),
        _ => (s, 0),
    };
    let value: usize = digits.trim().parse().map_err(|_| format!("not a byte count: {s}"))?;
    value
        .checked_mul(1 << shift)
        .ok_or_else(|| format!("byte count too large: {s}"))
}

impl BuildOptions {
    fn config(&self) -> Result<BuildConfig, Error> {
        let bucket_bits = match self.bucket_bits.as_str() {
            "auto" => None,
            b => Some(
                b.parse()
                    .map_err(|_| Error::Config(format!("bucket bits must be `auto` or a number, got {b}")))?,
            ),
        };
        let epsilon = Epsilon::from_f64(self.epsilon)
            .ok_or_else(|| Error::Config(format!("epsilon must be at least 1e-6, got {}", self.epsilon)))?;
        let mut config = BuildConfig {
            memory: self.memory,
            bucket_bits,
            epsilon,
            kappa: self.kappa,
            mode: self.mode.into(),
            provider: self.provider.into(),
            seed: self.seed,
            keep_spills: self.keep_spills,
            ..Default::default()
        };
        if let Some(dir) = &self.workdir {
            config.workdir = dir.clone();
        }
        Ok(config)
    }

    fn run(&self, keys: &dyn KeySource) -> Result<BuildOutput, Error> {
        let config = self.config()?;
        if self.standalone {
            build_standalone(keys, &config)
        } else {
            build(keys, &config)
        }
    }
}

enum Failure {
    Error(Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn load(path: &PathBuf) -> Result<PerfectHashFunction, Error> {
    let file = File::open(path).map_err(|e| Error::IoAt {
        path: path.clone(),
        source: e,
    })?;
    codec::decode(BufReader::new(file))
}

fn cmd_build(args: &BuildArgs) -> Result<(), Failure> {
    let keys = KeyFile::new(&args.input);
    let out = args.options.run(&keys)?;
    let file = File::create(&args.output).map_err(|e| Error::IoAt {
        path: args.output.clone(),
        source: e,
    })?;
    let mut sink = BufWriter::new(file);
    let report = codec::encode(&out.function, &mut sink)?;
    sink.flush()?;
    let s = &out.stats;
    println!(
        "{SUMMARY_VERSION} n={} b={} bytes={} bits_per_key={:.4} bits_per_key_without_fixed={:.4} \
         partition_s={:.3} search_s={:.3} total_s={:.3} spill_files={} seeks={} mean_attempts={:.3} acyclic_rate={:.4}",
        out.function.len(),
        out.function.bucket_bits(),
        report.total_bytes,
        report.bits_per_key,
        report.bits_per_key_without_fixed,
        secs(s.partition_time),
        secs(s.search_time),
        secs(s.total_time()),
        s.spill_files,
        s.seek_estimate,
        s.mean_attempts(),
        s.acyclic_rate(),
    );
    if let Some(warning) = report.warning {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn cmd_query(function: &PathBuf) -> Result<(), Failure> {
    let f = load(function)?;
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut line = Vec::new();
    loop {
        line.clear();
        if input.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        if line.last() == Some(&b'\n') {
            line.pop();
        }
        writeln!(out, "{}", f.evaluate(&line)?)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_verify(function: &PathBuf, input: &PathBuf, mode: Option<ModeArg>) -> Result<(), Failure> {
    let f = load(function)?;
    if let Some(expected) = mode.map(Mode::from) {
        if expected != f.mode() {
            return Err(Error::Config(format!(
                "mode mismatch: expected {expected:?}, {} holds {:?}",
                function.display(),
                f.mode()
            ))
            .into());
        }
    }
    let mut seen = BitVector::new(f.range() as usize);
    let mut line = 0u64;
    let mut offending: Option<String> = None;
    KeyFile::new(input).for_each_key(&mut |key| {
        line += 1;
        if offending.is_some() {
            return Ok(());
        }
        let v = f.evaluate(key)?;
        let key_text = String::from_utf8_lossy(key);
        if v >= f.range() {
            offending = Some(format!(
                "line {line} ({key_text}): value {v} out of range {}",
                f.range()
            ));
        } else if seen.get(v as usize) {
            offending = Some(format!("line {line} ({key_text}): value {v} already taken"));
        } else {
            seen.set(v as usize, true);
        }
        Ok(())
    })?;
    if offending.is_none() && line != f.len() {
        offending = Some(format!("{line} keys in the file, function was built for {}", f.len()));
    }
    match offending {
        Some(reason) => Err(Failure::Verify(reason)),
        None => {
            println!("PASS {} keys, {:?}", line, f.mode());
            Ok(())
        }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let mut csv: Box<dyn Write> = match &args.csv {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| Error::IoAt {
            path: path.clone(),
            source: e,
        })?)),
        None => Box::new(io::stdout()),
    };
    writeln!(csv, "# {SUMMARY_VERSION}")?;
    writeln!(csv, "{CSV_HEADER}")?;
    for &n in &args.sizes {
        let keys: Box<dyn KeySource> = match &args.input {
            Some(path) => {
                let file = KeyFile::new(path).with_limit(n);
                let available = file.count()?;
                if available < n {
                    return Err(
                        Error::Config(format!("{} holds {available} keys, fewer than {n}", path.display())).into(),
                    );
                }
                Box::new(file)
            }
            None => Box::new(RandomKeys::new(n, n)),
        };
        let mut rows = Vec::new();
        for trial in 0..args.trials {
            let mut options = args.options.clone();
            options.seed = args.options.seed.wrapping_add(trial as u64);
            let out = options.run(keys.as_ref())?;
            let report = codec::encode(&out.function, io::sink())?;
            let s = &out.stats;
            let row = [
                secs(s.partition_time),
                secs(s.search_time),
                secs(s.total_time()),
                report.bits_per_key,
                s.mean_attempts(),
                s.acyclic_rate(),
            ];
            writeln!(
                csv,
                "{n},{trial},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                row[0], row[1], row[2], row[3], row[4], row[5]
            )?;
            rows.push(row);
        }
        let column = |i: usize| mean_sd(&rows.iter().map(|r| r[i]).collect::<Vec<_>>());
        let names = [
            "partition_s",
            "search_s",
            "total_s",
            "bits_per_key",
            "mean_attempts",
            "acyclic_rate",
        ];
        let summary: Vec<String> = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let (mean, sd) = column(i);
                format!("{name}={mean:.4}±{sd:.4}")
            })
            .collect();
        eprintln!("{SUMMARY_VERSION} n={n} trials={} {}", args.trials, summary.join(" "));
    }
    csv.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Query { function } => cmd_query(function),
        Command::Verify { function, input, mode } => cmd_verify(function, input, *mode),
        Command::Bench(args) => {
            if args.trials == 0 {
                Err(Error::Config("trials must be positive".into()).into())
            } else {
                cmd_bench(args)
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(reason)) => {
            println!("FAIL {reason}");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::DuplicateKeys { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
