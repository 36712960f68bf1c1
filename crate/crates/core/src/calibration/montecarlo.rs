//! Seeded Monte Carlo repeats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Independent generator for repeat `index` under `root_seed`.
pub fn repeat_rng(root_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(index);
    rng
}

/// Runs `repeats` trials in parallel; results are in repeat order and do not
/// depend on the thread count.
pub fn monte_carlo<R, F>(root_seed: u64, repeats: usize, trial: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> R + Sync,
{
    (0..repeats)
        .into_par_iter()
        .map(|i| {
            let mut rng = repeat_rng(root_seed, i as u64);
            trial(i, &mut rng)
        })
        .collect()
}
