//! Counter-based, splittable random streams.
//!
//! A [`Stream`] is a SplitMix64 generator whose state after `i` steps is
//! `key + i * gamma`, so the `i`-th word can be computed directly with
//! [`Stream::word_at`]. Keys and gammas are derived from
//! `(master seed, replica index)`, which makes every replica's draws
//! independent of scheduling: worker `w` computing replica `r` sees the same
//! words as any other worker would.
//!
//! The sampler uses the random-access form (element `k` of `{1..n}` is
//! decided by word `k`), while Gaussian generation goes through the
//! sequential [`rand::RngCore`] implementation.

use rand::RngCore;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const REPLICA_SALT: u64 = 0xD1B5_4A32_D192_ED03;
const SUBSTREAM_SALT: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// Default master seed. A fixed constant, never wall-clock derived.
pub const DEFAULT_SEED: u64 = 20_150_317;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix64_variant(mut z: u64) -> u64 {
    z = (z ^ (z >> 33)).wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    z = (z ^ (z >> 33)).wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    z ^ (z >> 33)
}

// SplittableRandom's gamma derivation: odd, with enough bit transitions.
fn mix_gamma(z: u64) -> u64 {
    let g = mix64_variant(z) | 1;
    if (g ^ (g >> 1)).count_ones() < 24 {
        g ^ 0xAAAA_AAAA_AAAA_AAAA
    } else {
        g
    }
}

/// Provenance of a stream: which master seed and replica it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    origin: StreamKey,
    key: u64,
    gamma: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let base = mix64(seed ^ GOLDEN_GAMMA);
        let state = mix64(base.wrapping_add(replica.wrapping_add(1).wrapping_mul(REPLICA_SALT)));
        Self::from_state(StreamKey { seed, replica }, state)
    }

    fn from_state(origin: StreamKey, state: u64) -> Self {
        Self {
            origin,
            key: mix64(state),
            gamma: mix_gamma(state.wrapping_add(GOLDEN_GAMMA)),
            counter: 0,
        }
    }

    /// An independent child stream, identified by `id`, with the same provenance.
    pub fn substream(&self, id: u64) -> Self {
        let state = mix64(self.key ^ mix64(id.wrapping_add(1).wrapping_mul(SUBSTREAM_SALT)));
        Self::from_state(self.origin, state)
    }

    pub fn origin(&self) -> StreamKey {
        self.origin
    }

    /// The `index`-th word of the stream, independent of the sequential cursor.
    #[inline]
    pub fn word_at(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(index.wrapping_mul(self.gamma)))
    }

    /// Uniform on `[0, 1)` with 53 bits, from `word_at(index)`.
    #[inline]
    pub fn uniform_at(&self, index: u64) -> f64 {
        (self.word_at(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`, for logarithms.
    #[inline]
    pub fn next_open_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let w = self.word_at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// Bernoulli(`theta`) decision on a raw word, equivalent to
/// `uniform < theta` for the 53-bit uniform built from the same word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernoulliThreshold(u64);

impl BernoulliThreshold {
    /// `theta` must lie in `[0, 1]`; callers validate.
    pub fn new(theta: f64) -> Self {
        Self((theta * (1u64 << 53) as f64).ceil() as u64)
    }

    #[inline]
    pub fn accepts(self, word: u64) -> bool {
        (word >> 11) < self.0
    }
}
