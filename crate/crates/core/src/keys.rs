//! Sources of keys for a build. Builds may scan a source more than once
//! (counting, restarts, locating duplicates), so sources are re-iterable.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub trait KeySource {
    /// Calls `f` once per key, in order.
    fn for_each_key(&self, f: &mut dyn FnMut(&[u8]) -> Result<()>) -> Result<()>;

    fn count(&self) -> Result<u64> {
        let mut n = 0;
        self.for_each_key(&mut |_| {
            n += 1;
            Ok(())
        })?;
        Ok(n)
    }
}

impl<T: AsRef<[u8]>> KeySource for [T] {
    fn for_each_key(&self, f: &mut dyn FnMut(&[u8]) -> Result<()>) -> Result<()> {
        self.iter().try_for_each(|k| f(k.as_ref()))
    }

    fn count(&self) -> Result<u64> {
        Ok(self.len() as u64)
    }
}

impl<T: AsRef<[u8]>> KeySource for Vec<T> {
    fn for_each_key(&self, f: &mut dyn FnMut(&[u8]) -> Result<()>) -> Result<()> {
        self.as_slice().for_each_key(f)
    }

    fn count(&self) -> Result<u64> {
        Ok(self.len() as u64)
    }
}

/// Newline-delimited keys in a file. Lines are split on `0x0A` only and the
/// bytes are passed through untouched; a final newline is optional.
#[derive(Clone, Debug)]
pub struct KeyFile {
    path: PathBuf,
    limit: Option<u64>,
}

impl KeyFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        KeyFile {
            path: path.into(),
            limit: None,
        }
    }

    /// Only the first `limit` keys of the file.
    pub fn with_limit(mut self, limit: u64) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl KeySource for KeyFile {
    fn for_each_key(&self, f: &mut dyn FnMut(&[u8]) -> Result<()>) -> Result<()> {
        let file = File::open(&self.path).map_err(|e| Error::io_at(&self.path, e))?;
        let mut reader = BufReader::with_capacity(1 << 20, file);
        let mut line = Vec::with_capacity(128);
        let mut seen = 0u64;
        while self.limit.is_none_or(|limit| seen < limit) {
            line.clear();
            let read = reader
                .read_until(b'\n', &mut line)
                .map_err(|e| Error::io_at(&self.path, e))?;
            if read == 0 {
                break;
            }
            if line.last() == Some(&b'\n') {
                line.pop();
            }
            f(&line)?;
            seen += 1;
        }
        Ok(())
    }
}

/// Deterministic pseudo-random URL-like keys, pairwise distinct, without
/// NUL bytes and at most 64 bytes long.
#[derive(Clone, Copy, Debug)]
pub struct RandomKeys {
    count: u64,
    seed: u64,
}

impl RandomKeys {
    pub fn new(count: u64, seed: u64) -> Self {
        RandomKeys { count, seed }
    }
}

const ALPHABET: &[u8; 64] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_";

impl KeySource for RandomKeys {
    fn for_each_key(&self, f: &mut dyn FnMut(&[u8]) -> Result<()>) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut key = Vec::with_capacity(64);
        for i in 0..self.count {
            key.clear();
            key.extend_from_slice(b"http://");
            let host_len = rng.random_range(3..=12);
            let mut bits = rng.next_u64();
            key.extend((0..host_len).map(|k| ALPHABET[((bits >> (5 * k)) & 31) as usize % 26]));
            key.extend_from_slice(b".com/");
            // The index, base 64, makes every key unique.
            let mut v = i;
            loop {
                key.push(ALPHABET[(v % 64) as usize]);
                v /= 64;
                if v == 0 {
                    break;
                }
            }
            key.push(b'/');
            let path_len = rng.random_range(0..=64 - key.len());
            for k in 0..path_len {
                if k % 10 == 0 {
                    bits = rng.next_u64();
                }
                key.push(ALPHABET[((bits >> (6 * (k % 10))) & 63) as usize]);
            }
            f(&key)?;
        }
        Ok(())
    }

    fn count(&self) -> Result<u64> {
        Ok(self.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write;

    fn collect(source: &dyn KeySource) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        source
            .for_each_key(&mut |k| {
                out.push(k.to_vec());
                Ok(())
            })
            .unwrap();
        out
    }

    #[test]
    fn key_file_splits_on_newline_only() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(b"alpha\r\nbeta\n\xffgamma").unwrap();
        let source = KeyFile::new(file.path());
        assert_eq!(
            collect(&source),
            vec![b"alpha\r".to_vec(), b"beta".to_vec(), b"\xffgamma".to_vec()]
        );
        assert_eq!(source.count().unwrap(), 3);
        assert_eq!(collect(&source.clone().with_limit(2)).len(), 2);
    }

    #[test]
    fn trailing_newline_does_not_add_a_key() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(b"a\nb\n").unwrap();
        assert_eq!(KeyFile::new(file.path()).count().unwrap(), 2);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = KeyFile::new("/nonexistent/keys.txt").count().unwrap_err();
        assert!(err.to_string().contains("/nonexistent/keys.txt"));
    }

    #[test]
    fn random_keys_are_distinct_and_well_formed() {
        let keys = collect(&RandomKeys::new(50_000, 1));
        assert_eq!(keys.len(), 50_000);
        assert!(keys.iter().all(|k| !k.is_empty() && k.len() <= 64 && !k.contains(&0)));
        let unique: HashSet<_> = keys.iter().collect();
        assert_eq!(unique.len(), keys.len());
        assert_eq!(keys, collect(&RandomKeys::new(50_000, 1)));
    }
}
