//! Plain fixed-length bit vectors, packed LSB-first into 64-bit words.

#[derive(Clone, PartialEq, Eq, Default)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn new(len: usize) -> Self {
        BitVector {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if bit {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        BitVector { words, len }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Reads `width` (at most 16) bits starting at `pos`, LSB first.
    #[inline]
    pub fn chunk16(&self, pos: usize, width: usize) -> u16 {
        debug_assert!(width <= 16 && pos + width <= self.len);
        if width == 0 {
            return 0;
        }
        let word = pos / 64;
        let shift = pos % 64;
        let mut v = self.words[word] >> shift;
        if shift + width > 64 {
            v |= self.words[word + 1] << (64 - shift);
        }
        (v & ((1u64 << width) - 1)) as u16
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn size_bits(&self) -> usize {
        self.len
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitVector[{}](", self.len)?;
        for b in self.iter().take(128) {
            f.write_str(if b { "1" } else { "0" })?;
        }
        if self.len > 128 {
            f.write_str("...")?;
        }
        f.write_str(")")
    }
}

/// Appends bit fields LSB-first into a byte buffer.
#[derive(Default)]
pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bits(&mut self, value: u64, width: usize) {
        debug_assert!(width <= 64);
        for k in 0..width {
            self.push_bit(value >> k & 1 == 1);
        }
    }

    #[inline]
    pub fn push_bit(&mut self, bit: bool) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 1 << (self.bit_len % 8);
        }
        self.bit_len += 1;
    }

    pub fn push_vector(&mut self, bits: &BitVector) {
        if self.bit_len.is_multiple_of(8) {
            // Byte-aligned fast path.
            let n_bytes = bits.len().div_ceil(8);
            let start = self.bytes.len();
            self.bytes.resize(start + n_bytes, 0);
            for (i, byte) in self.bytes[start..].iter_mut().enumerate() {
                *byte = (bits.words()[i / 8] >> (8 * (i % 8))) as u8;
            }
            self.bit_len += bits.len();
        } else {
            for b in bits.iter() {
                self.push_bit(b);
            }
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Reads bit fields LSB-first from a byte slice.
pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    #[inline]
    pub fn read_bit(&mut self) -> Option<bool> {
        let byte = *self.bytes.get(self.pos / 8)?;
        let bit = byte >> (self.pos % 8) & 1 == 1;
        self.pos += 1;
        Some(bit)
    }

    pub fn read_bits(&mut self, width: usize) -> Option<u64> {
        if self.remaining() < width {
            return None;
        }
        let mut v = 0u64;
        for k in 0..width {
            if self.read_bit()? {
                v |= 1 << k;
            }
        }
        Some(v)
    }

    pub fn read_vector(&mut self, len: usize) -> Option<BitVector> {
        if self.remaining() < len {
            return None;
        }
        let mut v = BitVector::new(len);
        for i in 0..len {
            if self.read_bit()? {
                v.set(i, true);
            }
        }
        Some(v)
    }
}
