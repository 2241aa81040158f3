//! Seed derivation.
//!
//! Every random stream in a run descends from one user seed. A child seed is
//! a SplitMix64 mix of its parent and a path label, so any node of the tree
//! (a replicate, a stage, a chain) can be re-created on its own:
//!
//! ```text
//! seed
//!  ├─ replicate r          derive(seed, REPLICATE, r)
//!  │   ├─ data generation  derive(rep, DATA, 0)
//!  │   ├─ stage 1          derive(rep, STAGE1, 0)
//!  │   └─ stage 2          derive(rep, STAGE2, 0)
//! ```
//!
//! A plain pipeline run (no replicates) uses the user seed as `rep`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SamplerRng = ChaCha8Rng;

pub const REPLICATE: u64 = 0x5245_504c;
pub const DATA: u64 = 0x4441_5441;
pub const STAGE1: u64 = 0x5354_4731;
pub const STAGE2: u64 = 0x5354_4732;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, label: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label ^ splitmix64(index)))
}

pub fn rng_from(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}
