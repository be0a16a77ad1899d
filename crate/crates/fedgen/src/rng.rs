//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a mix of
//! a base seed and a stream tag, so independent components (world means,
//! dataset sampling, shuffling, synthesis, ...) never share a stream and the
//! whole simulation is bit-reproducible from the top-level seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer over a golden-ratio mix of `base` and `stream`.
pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}
