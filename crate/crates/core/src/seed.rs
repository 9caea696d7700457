//! Deterministic seed derivation.
//!
//! Every random stream in an experiment is a ChaCha8 generator seeded from
//! the root seed through [`derive_seed`], so the output of a run does not
//! depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels used when splitting a replication seed.
pub mod stream {
    pub const REPLICATION: u64 = 0x5245_504c;
    pub const CONTEXTS: u64 = 0x4354_5854;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const POLICY: u64 = 0x504f_4c59;
    pub const THETA_STAR: u64 = 0x5448_5354;
    pub const THETA0: u64 = 0x5448_3030;
    pub const DIAGNOSTICS: u64 = 0x4449_4147;
}

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `root` and a path of labels.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(root: u64, path: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(root, path))
}
