use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("I/O error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("key of {len} bytes exceeds the maximum key length of {max} bytes")]
    KeyTooLong { len: usize, max: usize },

    #[error("invalid key at line {line}: {reason}")]
    InvalidKey { line: u64, reason: String },

    #[error("no working seed found after {attempts} attempts for a bucket of {size} keys")]
    SeedSearchExhausted { attempts: u32, size: usize },

    #[error("bucket {bucket} holds {size} keys, more than the limit of {limit}")]
    BucketOverflow { bucket: u32, size: usize, limit: usize },

    #[error("duplicate fingerprint {fingerprint:#034x} in bucket {bucket}")]
    DuplicateFingerprint { fingerprint: u128, bucket: u32 },

    /// Duplicates survived every restart; `lines` are the 1-based input lines
    /// of the keys sharing the fingerprint (usually identical keys).
    #[error("duplicate keys at lines {lines:?}")]
    DuplicateKeys { lines: Vec<u64> },

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::IoAt {
            path: path.into(),
            source,
        }
    }
}
