//! Deterministic random streams.
//!
//! A [`RngStream`] is a `(seed, stream_id)` label, not a generator. Calling
//! [`RngStream::rng`] materialises a ChaCha8 generator keyed by `seed` whose
//! 64-bit stream (nonce) is `stream_id`. ChaCha is counter based, so the
//! `k`-th draw of a stream depends only on `(seed, stream_id, k)` and never on
//! which thread produced it.
//!
//! Sub-streams are derived by hashing the parent id with a label, which lets
//! the filter key per-particle streams by `(root, time step, purpose, index)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A logical random stream identified by a root seed and a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// SplitMix64 finaliser.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub const fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub const fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream for `label`. Deterministic in `(self, label)`; siblings
    /// with distinct labels get distinct stream ids with overwhelming probability.
    #[inline]
    pub fn derive(self, label: u64) -> Self {
        let id = mix64(
            mix64(self.stream_id ^ 0x9e37_79b9_7f4a_7c15)
                .wrapping_add(label.wrapping_mul(0xd1b5_4a32_d192_ed03)),
        );
        Self {
            seed: self.seed,
            stream_id: id,
        }
    }

    /// Materialise the generator positioned at draw index 0.
    #[inline]
    pub fn rng(self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        StreamRng { inner }
    }
}

/// Generator backing a [`RngStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        rand::Rng::random_range(self, 0..n)
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
