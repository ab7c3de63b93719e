//! Rank over bit vectors using sampled prefix counts and a 16-bit popcount table.
//!
//! The count of 1s before every `kappa`-th position is stored explicitly. A
//! query looks up the nearest sample at or below the position and counts the
//! remaining bits sixteen at a time through a table shared by every vector.

use crate::bits::BitVector;

/// Number of set bits for every 16-bit value.
pub static POPCOUNT16: [u8; 1 << 16] = build_popcount16();

const fn build_popcount16() -> [u8; 1 << 16] {
    let mut table = [0u8; 1 << 16];
    let mut i = 1;
    while i < (1 << 16) {
        table[i] = table[i >> 1] + (i & 1) as u8;
        i += 1;
    }
    table
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedBitVector {
    bits: BitVector,
    kappa: u32,
    /// `samples[j]` = number of 1s in `bits[0 .. j * kappa)`, for `j * kappa <= len`.
    samples: Vec<u32>,
}

impl RankedBitVector {
    pub fn new(bits: BitVector, kappa: u32) -> Self {
        assert!(kappa >= 1, "kappa must be positive");
        let kappa_us = kappa as usize;
        let mut samples = Vec::with_capacity(bits.len() / kappa_us + 1);
        samples.push(0);
        let mut count = 0u32;
        for (i, bit) in bits.iter().enumerate() {
            count += bit as u32;
            if (i + 1) % kappa_us == 0 {
                samples.push(count);
            }
        }
        RankedBitVector { bits, kappa, samples }
    }

    /// Number of 1s strictly before position `i` (`0 <= i <= len`).
    #[inline]
    pub fn rank1(&self, i: usize) -> usize {
        debug_assert!(i <= self.bits.len());
        let kappa = self.kappa as usize;
        let j = i / kappa;
        let mut count = self.samples[j] as usize;
        let mut pos = j * kappa;
        while pos + 16 <= i {
            count += POPCOUNT16[self.bits.chunk16(pos, 16) as usize] as usize;
            pos += 16;
        }
        count + POPCOUNT16[self.bits.chunk16(pos, i - pos) as usize] as usize
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn samples(&self) -> &[u32] {
        &self.samples
    }

    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.rank1(self.bits.len())
    }
}
