//! Deterministic random streams.
//!
//! Every randomized computation takes a [`Stream`] derived from one root
//! seed as `child_seed(root, tag, index)`: FNV-1a over the root seed, a
//! module tag, and an index, finished with the SplitMix64 mixer. Tags keep
//! modules out of each other's randomness, indices keep replications
//! independent, and nothing is ever shared across threads, so any artifact
//! reproduces bit-for-bit from `(root seed, tag, index)` alone.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(hash, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(root, tag, index)`. Stable across runs and platforms.
pub fn child_seed(root: u64, tag: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    h = fnv1a(h, &root.to_le_bytes());
    h = fnv1a(h, tag.as_bytes());
    h = fnv1a(h, &index.to_le_bytes());
    splitmix64(h)
}

/// Deterministic RNG stream (ChaCha12).
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha12Rng,
    seed: u64,
}

impl Stream {
    /// Stream seeded directly; use for roots.
    pub fn from_seed(seed: u64) -> Self {
        Stream { rng: ChaCha12Rng::seed_from_u64(seed), seed }
    }

    /// Stream for `(root, tag, index)`.
    pub fn child(root: u64, tag: &str, index: u64) -> Self {
        Stream::from_seed(child_seed(root, tag, index))
    }

    /// Further split: a sub-stream of this stream's seed.
    pub fn substream(&self, tag: &str, index: u64) -> Self {
        Stream::child(self.seed, tag, index)
    }

    /// Seed this stream was built from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits; exact dyadic rational in [0, 1).
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
