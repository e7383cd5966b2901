//! Seeded randomness.
//!
//! Every random stream in the crate comes from ChaCha8 (`rand_chacha::ChaCha8Rng`),
//! seeded through `seed_from_u64`. ChaCha output is specified independently of
//! platform and word size, so a given [`RngSeed`] yields the same stream everywhere.
//! Sub-seeds for independent streams are derived with the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Deterministic child seed for the stream labelled by `path`.
    pub fn derive(self, path: &[u64]) -> RngSeed {
        let mut state = splitmix64(self.0);
        for &p in path {
            state = splitmix64(state ^ splitmix64(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        }
        RngSeed(state)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
