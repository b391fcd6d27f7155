//! Seeded random streams.
//!
//! Every random decision in a run is drawn from a ChaCha8 generator keyed by
//! the run's root seed. Independent purposes use independent ChaCha streams:
//! the 64-bit stream number is `(purpose << 32) | lane`, where `lane` is the
//! region index for per-region draws and `0` otherwise. Streams never share
//! state, so adding a new purpose or consuming more values from one stream
//! leaves every other stream untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. The discriminant is part of the stream
/// number and must never be reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Purpose {
    /// Picking the verification subset of a region.
    Verify = 1,
    /// Picking the members a region contributes to the coreset.
    RegionSample = 2,
    /// Filling a budget shortfall after the region loop.
    TopUp = 3,
    /// The uniform random baseline.
    RandomBaseline = 4,
    /// Toy-model weight initialisation.
    Init = 16,
    /// Mini-batch shuffling during training.
    Shuffle = 17,
    /// Synthetic task geometry (means, covariances).
    TaskGeometry = 18,
    /// Synthetic task sample draws.
    TaskSamples = 19,
}

/// Builds the generator for `(seed, purpose, lane)`.
pub fn stream(seed: u64, purpose: Purpose, lane: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | lane as u64);
    rng
}

/// Draws `k` distinct indices from `0..n` uniformly, by a partial
/// Fisher-Yates shuffle. The result is in draw order.
///
/// Panics if `k > n`.
pub fn sample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} of {n} without replacement");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Draws `k` distinct elements of `items` (cloned) in draw order.
pub fn sample_from<T: Clone, R: Rng + ?Sized>(rng: &mut R, items: &[T], k: usize) -> Vec<T> {
    sample_indices(rng, items.len(), k)
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}
