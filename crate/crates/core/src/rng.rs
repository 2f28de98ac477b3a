//! Seeded random streams.
//!
//! Every stochastic step in the crate draws from a ChaCha8 generator derived
//! from a user seed and a fixed stream id, so independent consumers of the same
//! seed never share a sequence.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream ids used across the crate.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const TRAIN_SHUFFLE: u64 = 2;
    pub const BLOB_MEANS: u64 = 3;
    pub const BLOB_SAMPLES: u64 = 4;
    pub const HR_SPLIT: u64 = 5;
    pub const FORGET_SHUFFLE: u64 = 6;
    pub const RETAIN_STREAM: u64 = 7;
    pub const RANDOM_LABELS: u64 = 8;
    pub const MIA_SPLIT: u64 = 9;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
