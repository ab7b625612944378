//! Per-replicate random streams.
//!
//! Every replicate owns a generator derived only from the experiment seed and
//! its replicate index, so replicates can be produced in any order (or in
//! parallel) without changing a single bit of output.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

pub type StreamRng = Xoshiro256PlusPlus;

/// 64-bit avalanche mix (the SplitMix64 finalizer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub replicate: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    /// Key of the replicate's primary stream.
    pub fn key(&self) -> u64 {
        mix64(mix64(self.seed) ^ mix64(self.replicate.wrapping_add(0x5851_F42D_4C95_7F2D)))
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.key())
    }

    /// Independent named sub-stream of this replicate (e.g. the normals of a
    /// bridge reconstruction, kept apart from the path's own stream).
    pub fn substream(&self, tag: u64) -> StreamRng {
        StreamRng::seed_from_u64(mix64(self.key() ^ mix64(tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))))
    }

    /// Seed for an independent experiment derived from this one, e.g. a
    /// second grid resolution in a refinement study.
    pub fn derive_seed(seed: u64, tag: u64) -> u64 {
        mix64(seed ^ mix64(tag ^ 0xA076_1D64_78BD_642F))
    }
}
