//! Seeded random streams.
//!
//! Every stochastic operation takes a `u64` seed. Independent work items
//! (Monte Carlo replications, bootstrap draws, sweep cells) each get their own
//! ChaCha8 stream: the generator is seeded from the seed and then switched to
//! stream number `id`. Work can therefore be split across threads without
//! changing any draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator for stream `id` of `seed`.
pub fn substream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derives a child seed, used to give modules or sweep cells separate seed spaces.
pub fn derive_seed(seed: u64, id: u64) -> u64 {
    substream(seed, id).random()
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
