//! Seeded random streams.
//!
//! Every random decision in a run is drawn from a ChaCha8 stream keyed by the
//! run seed plus a fixed domain tag, so separate concerns (splitting,
//! corruption, initialization, shuffling) never share or perturb each other's
//! draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const SPLIT: u64 = 1;
pub(crate) const CORRUPT: u64 = 2;
pub(crate) const INIT: u64 = 3;
pub(crate) const SHUFFLE: u64 = 4;
pub(crate) const BLOBS: u64 = 5;

pub(crate) fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) ^ index);
    rng
}
