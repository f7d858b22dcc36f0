//! Deterministic random-stream derivation.
//!
//! Every stochastic component draws from a ChaCha stream derived from the run
//! seed and a unit index (mode, particle, or episode). Parallel workers each
//! own their stream, so results are reproducible regardless of thread count.

use rand_chacha::ChaCha8Rng;

/// Stream for unit `index` of run `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
