//! Seeded random streams.
//!
//! Every random draw in the library comes from a ChaCha8 stream derived from
//! a 64-bit seed; parallel work uses independent substreams of the same seed
//! keyed by a counter, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The `index`-th independent substream of `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
