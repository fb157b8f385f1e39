//! Deterministic random streams.
//!
//! Every draw in the crate comes from a ChaCha8 generator keyed by a 64-bit
//! seed and selected by a 64-bit stream index. Sampling work is split into
//! fixed-size shards, shard `i` always reads stream `base + i`, and shard
//! outputs are concatenated (or summed) in shard order, so the result does
//! not depend on how many worker threads ran the shards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Number of draws per shard.
pub const SHARD_SIZE: usize = 1 << 14;

/// Stream-index namespaces, kept apart so that derived computations never
/// reuse the stream of the main sample.
pub mod tag {
    pub const MAIN: u64 = 0;
    pub const EXPECTATION: u64 = 1 << 40;
    pub const INNER_MEAN: u64 = 2 << 40;
    pub const PROJECTIONS: u64 = 3 << 40;
    pub const DIAMETER: u64 = 4 << 40;
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mix a seed with a label; used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run `f(shard_index, shard_len, rng)` for every shard covering `count`
/// draws and return the per-shard results in shard order.
pub fn map_shards<T, F>(seed: u64, base: u64, count: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, &mut ChaCha8Rng) -> T + Sync,
{
    let shards = count.div_ceil(SHARD_SIZE);
    let run = |i: usize| {
        let len = SHARD_SIZE.min(count - i * SHARD_SIZE);
        let mut rng = stream(seed, base + i as u64);
        f(i, len, &mut rng)
    };
    match threads {
        Some(1) => (0..shards).map(run).collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool");
            pool.install(|| (0..shards).into_par_iter().map(run).collect())
        }
        None => (0..shards).into_par_iter().map(run).collect(),
    }
}
