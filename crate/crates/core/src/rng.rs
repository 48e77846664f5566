//! Reproducible random streams.
//!
//! Every unit of stochastic work (a ground-motion realization, a bootstrap
//! replicate) owns a [`RandomStream`] identified by `(master seed, index)`.
//! The generator behind it is ChaCha20 keyed by the seed with the index as
//! its stream selector, so the draws of a unit never depend on how many
//! units ran before it or on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }

    /// Independent stream for a different purpose (`domain`) with the same
    /// index, e.g. parameter draws vs. white-noise impulses of one motion.
    pub fn derive(&self, domain: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(domain.wrapping_add(0x9E37_79B9_7F4A_7C15))),
            index: self.index,
        }
    }

    /// Stream `index` under the same master seed.
    pub fn with_index(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
