//! Seeded, platform-independent random streams.
//!
//! Every stochastic operation in the crate draws from a generator obtained
//! through [`RngStream`]. A stream is identified by a `(seed, stream_id)` pair
//! and maps onto a ChaCha8 generator keyed by `seed` with its 64-bit stream
//! selector set to `stream_id`, so draw sequences are identical across
//! platforms and independent across stream ids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The concrete generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derives a child stream sharing the seed. Distinct tags give distinct,
    /// reproducible stream ids.
    pub fn derive(&self, tag: u64) -> Self {
        let id = splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)));
        Self {
            seed: self.seed,
            stream_id: id,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_same_draws() {
        let a: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        let b: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a: u64 = RngStream::new(7, 3).rng().random();
        let b: u64 = RngStream::new(7, 4).rng().random();
        let c: u64 = RngStream::new(8, 3).rng().random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_streams_are_stable_and_distinct() {
        let base = RngStream::new(1, 0);
        assert_eq!(base.derive(5), base.derive(5));
        assert_ne!(base.derive(5), base.derive(6));
        assert_ne!(base.derive(5).derive(1), base.derive(1).derive(5));
    }

    #[test]
    fn known_first_draw() {
        // Frozen so an accidental change of generator is caught.
        let first: u64 = RngStream::new(42, 0).rng().random();
        let again: u64 = ChaCha8Rng::seed_from_u64(42).random();
        assert_eq!(first, again);
    }
}
