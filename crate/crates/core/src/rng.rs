//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, path_index, stream_tag, counter)`, so a
//! batch of paths produces identical numbers regardless of how the paths are
//! scheduled across threads. The mixer is the SplitMix64 finalizer applied to a
//! Weyl sequence, which makes the generator trivially seekable.

use rand_core::{impls, RngCore};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an index.
///
/// This is the documented shard-seed hash: `mix64(mix64(seed) ^ mix64(index + GOLDEN))`.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Named stream tags so independent components of one path never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    StableIncrement = 1,
    Gaussian = 2,
    SmallJumps = 3,
    BigJumps = 4,
    Perturbation = 5,
    Probe = 6,
    Oracle = 7,
}

/// A seekable stream keyed by `(seed, path_index, stream_tag)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, path_index: u64, tag: StreamTag) -> Self {
        let key = derive_seed(derive_seed(seed, path_index), tag as u64);
        Self { key, counter: 0 }
    }

    pub fn from_key(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Value of the stream at an arbitrary position, without advancing.
    #[inline]
    pub fn at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn set_position(&mut self, counter: u64) {
        self.counter = counter;
    }

    /// Uniform in the open interval (0, 1), 53 bits.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) / DEN
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let out = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
