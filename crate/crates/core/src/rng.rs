//! Counter-based seed derivation.
//!
//! Every random stream in the pipeline is keyed by a master seed plus a path
//! of counters (run, tree, stage, student...). Streams never depend on the
//! order in which work items execute, so serial and parallel runs agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a path of counters.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &k| splitmix(acc ^ splitmix(k.wrapping_add(0xA5A5))))
}

pub fn stream(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, path))
}
