//! Explicit seeding helpers. Nothing in this crate reads ambient randomness;
//! every generator is built from a seed that flows in through the API.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer, used to decorrelate structured seed components.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a master seed and an ordered list of stream ids.
///
/// Each component is mixed before combining, so `(1, 0)` and `(0, 1)` give
/// unrelated seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(master), |acc, &p| {
        mix64(acc ^ mix64(p).rotate_left(17))
    })
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sub_rng(master: u64, parts: &[u64]) -> Rng {
    rng_from_seed(derive_seed(master, parts))
}
