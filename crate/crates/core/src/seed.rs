//! Counter-based seed derivation.
//!
//! Every random stream in a simulation is keyed by a path of integers rooted
//! at a master seed, e.g. `(master, GRAPH, replica)` or
//! `(cell_seed, RUN, run_index)`. The key is folded through the SplitMix64
//! finalizer, so any stream can be reconstructed in isolation and the
//! assignment of work to threads never changes which numbers a run sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream in the crate.
pub type SimRng = ChaCha8Rng;

/// Stream tags, kept distinct so sibling streams never collide.
pub mod tag {
    pub const GRAPH: u64 = 0x4752_4150_4800_0001;
    pub const CELL: u64 = 0x4345_4c4c_0000_0002;
    pub const SEED_NODES: u64 = 0x5345_4544_0000_0003;
    pub const RUN: u64 = 0x5255_4e00_0000_0004;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parent` with each component of `path`, in order.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
