//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream)`; ChaCha's 64-bit stream
//! selector keeps streams independent, so results do not depend on the
//! order or thread in which replicates run.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Purpose tags multiplexed into the stream id of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Truth = 1,
    Layout = 2,
    Theta = 3,
    Mask = 4,
    Noise = 5,
    Labels = 6,
    Impute = 7,
    Folds = 8,
}

const PURPOSE_BITS: u32 = 8;

/// Generator for an explicit stream id.
pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Generator for one purpose of one replicate.
pub fn replicate_stream(seed: u64, replicate: u64, purpose: Purpose) -> StreamRng {
    stream(seed, (replicate << PURPOSE_BITS) | purpose as u64)
}
