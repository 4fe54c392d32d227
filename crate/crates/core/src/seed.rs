//! Per-run seed derivation and the generator used throughout the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random generator used for every seeded operation.
pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function (Steele, Lea & Flood). A bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for bootstrap run `run` (1-based) under `master_seed`.
///
/// This is element `run` of the SplitMix64 stream started at `master_seed`,
/// so distinct runs under the same master never collide and the value does
/// not depend on which worker executes the run.
pub fn derive_run_seed(master_seed: u64, run: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(run.wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
