//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 keystream addressed by
//! `(root, stream, counter)`: the root seed is expanded into the cipher key,
//! `stream` selects the ChaCha stream id and `counter` selects a block range
//! inside that stream. Parallel work is split into fixed-size chunks, each
//! reading from its own counter range, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of keystream words reserved for each counter value (2^36).
const COUNTER_SHIFT: u32 = 36;

/// Identifies one reproducible random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub root: u64,
    pub stream: u64,
}

impl Seed {
    pub const fn new(root: u64, stream: u64) -> Self {
        Seed { root, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Seed { root: self.root, stream }
    }

    /// A child stream keyed by `tag`. Children of distinct tags (and the
    /// parent itself) read disjoint keystreams.
    pub fn derive(self, tag: u64) -> Self {
        let mut s = self.stream ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D));
        s = splitmix64(s);
        Seed { root: self.root, stream: s }
    }

    /// Generator positioned at block range `counter` of this stream.
    pub fn rng_at(self, counter: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.root;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng.set_word_pos(u128::from(counter) << COUNTER_SHIFT);
        rng
    }

    pub fn rng(self) -> ChaCha8Rng {
        self.rng_at(0)
    }
}

impl Default for Seed {
    fn default() -> Self {
        Seed::new(0, 0)
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform index in `0..n` via the multiply-high map (bias below n / 2^64).
#[inline]
pub(crate) fn index_below(rng: &mut impl rand::RngCore, n: usize) -> usize {
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_address_same_bytes() {
        let s = Seed::new(42, 7);
        let a: Vec<u64> = (0..16).map(|_| 0).scan(s.rng_at(3), |r, _: u64| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..16).map(|_| 0).scan(s.rng_at(3), |r, _: u64| Some(r.next_u64())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_and_counters_differ() {
        let s = Seed::new(42, 7);
        let first = |seed: Seed, c| seed.rng_at(c).next_u64();
        assert_ne!(first(s, 0), first(s, 1));
        assert_ne!(first(s, 0), first(s.with_stream(8), 0));
        assert_ne!(first(s, 0), first(Seed::new(43, 7), 0));
        assert_ne!(first(s.derive(1), 0), first(s.derive(2), 0));
    }

    #[test]
    fn index_below_in_range() {
        let mut rng = Seed::new(1, 1).rng();
        for n in [1usize, 2, 3, 1000] {
            for _ in 0..1000 {
                assert!(index_below(&mut rng, n) < n);
            }
        }
    }
}
