//! Counter-based seed derivation.
//!
//! One master seed fans out to independent streams. A derived seed is
//!
//! ```text
//! derive(master, stream, index) = mix(mix(master ^ mix(stream)) ^ index)
//! ```
//!
//! where `mix` is the SplitMix64 finalizer. Stages and samples each get their
//! own stream, so any stage (or any single sample's dropout mask) can be
//! regenerated without replaying the others, and parallel and serial runs
//! draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Well-known stream identifiers.
pub mod stream {
    pub const DATASET: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const TARGET_INIT: u64 = 3;
    pub const TARGET_SHUFFLE: u64 = 4;
    pub const VIEWS: u64 = 5;
    pub const ENCODER_INIT: u64 = 6;
    pub const ENCODER_SHUFFLE: u64 = 7;
    pub const HEAD_INIT: u64 = 8;
    pub const HEAD_SHUFFLE: u64 = 9;
    pub const NN_ATTACK: u64 = 10;
    pub const LABELED: u64 = 11;
    pub const CONTRASTIVE: u64 = 12;
    pub const FINETUNE: u64 = 13;
}

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(master ^ mix(stream)) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stream: u64, index: u64) -> Rng {
    rng(derive(master, stream, index))
}
