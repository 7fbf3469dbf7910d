//! Seed derivation for reproducible, thread-count independent experiments.
//!
//! No code in this crate touches global randomness. A [`SeedTree`] is a
//! 64-bit seed that can be split into child seeds keyed by a task index, so a
//! parallel loop over tasks gives the same results regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type SimRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTree(pub u64);

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree(seed)
    }

    /// Independent child stream for task `key`.
    pub fn child(self, key: u64) -> Self {
        SeedTree(splitmix64(self.0 ^ splitmix64(key.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    /// Child stream keyed by a string label, for naming roles ("query", "calibration").
    pub fn named(self, label: &str) -> Self {
        let key = label
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        self.child(key)
    }

    pub fn rng(self) -> SimRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Fresh generator for `seed`.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SeedTree(seed).rng()
}
