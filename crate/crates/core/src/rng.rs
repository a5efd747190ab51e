//! Deterministic RNG streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! the episode seed, so adding draws in one component never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_ARRIVALS: u64 = 0x100;
pub const STREAM_SIZES: u64 = 0x200;
pub const STREAM_SHUFFLE: u64 = 0x300;
pub const STREAM_SIM: u64 = 0x400;
pub const STREAM_AGENT: u64 = 0x500;

/// Returns the RNG for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
