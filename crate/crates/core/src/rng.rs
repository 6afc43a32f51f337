//! Reproducible random streams.
//!
//! Every parallel work item (trajectory, run, sample) draws from its own
//! ChaCha stream selected by its index, so results do not depend on the
//! number of worker threads or on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for work item `index` under `master_seed`.
pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Generator for a named sub-experiment, keeping its streams disjoint from
/// the per-item streams of another phase of the same run.
pub fn substream(master_seed: u64, phase: u64, index: u64) -> StreamRng {
    let mixed = master_seed ^ phase.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    stream(mixed, index)
}

/// Well-mixed seed for sub-run `index` of a run seeded with `master_seed`
/// (one splitmix64 round).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
