//! Seeded random streams.
//!
//! Every path is driven by its own ChaCha8 generator whose seed is derived
//! from the master seed and a list of stream coordinates (for example the
//! sample size and the replicate index). Streams therefore do not depend on
//! the order in which replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with stream coordinates into a 64-bit seed.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Generator for a single path.
pub fn path_rng(seed: u64) -> PathRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `coords` under `master`.
pub fn stream_rng(master: u64, coords: &[u64]) -> PathRng {
    path_rng(derive_seed(master, coords))
}
