//! Deterministic random substreams.
//!
//! Every parallel unit of work (a Monte Carlo shard, a simulated slot, a sweep
//! cell) gets its own ChaCha stream derived from a master seed and an index, so
//! results never depend on how rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of Monte Carlo samples drawn from one substream.
pub const SHARD_SIZE: u64 = 1 << 16;

/// RNG for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a list of cell labels.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(master), |acc, &l| mix64(acc ^ mix64(l)))
}

/// Split `total` samples into `(shard index, shard length)` pairs.
pub fn shards(total: u64) -> impl Iterator<Item = (u64, u64)> + Clone {
    let full = total / SHARD_SIZE;
    let rem = total % SHARD_SIZE;
    (0..full)
        .map(|i| (i, SHARD_SIZE))
        .chain((rem > 0).then_some((full, rem)))
}
