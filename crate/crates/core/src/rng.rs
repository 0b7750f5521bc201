//! Seeded random streams.
//!
//! A run is driven by one 64-bit master seed. Every consumer gets its own
//! ChaCha8 stream: the generator is keyed by the master seed and the 64-bit
//! stream number is `domain << 56 | index`, where `domain` identifies the
//! consumer kind and `index` (below `2^56`) numbers consumers of that kind,
//! e.g. replicate `r` of a Monte Carlo run. Streams never overlap, so results
//! depend only on `(seed, config)` and not on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn stream(self, domain: StreamDomain, index: u64) -> ChaCha8Rng {
        assert!(index < 1 << 56, "stream index {index} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(((domain as u64) << 56) | index);
        rng
    }

    /// Derives a child seed, e.g. one per sweep point.
    pub fn child(self, index: u64) -> Seed {
        use rand::RngCore;
        Seed(self.stream(StreamDomain::Child, index).next_u64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamDomain {
    Activities = 1,
    Adaptation = 2,
    Acceptance = 3,
    Replicate = 4,
    Child = 5,
    Auxiliary = 6,
}
