//! Seeded, portable random streams.
//!
//! Every stochastic component draws from a ChaCha8 generator. A base seed is
//! split into independent streams by purpose (profile draws, noise, payload,
//! ...) using ChaCha's native stream selector, and into per-realization seeds
//! with a SplitMix64 counter hash. Identical seeds give identical draws on
//! every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a random stream. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Profile = 1,
    Noise = 2,
    Payload = 3,
    Pilot = 4,
    MultiStart = 5,
    Shadowing = 6,
    Samples = 7,
    Ensemble = 8,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Seed for realization `index` of an ensemble rooted at `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
