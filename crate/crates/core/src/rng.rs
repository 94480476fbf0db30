//! Independent random streams for initialization, dropout, latent noise and
//! shuffling, so that changing one consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStreams {
    pub init: ChaCha8Rng,
    pub dropout: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub shuffle: ChaCha8Rng,
}

impl RngStreams {
    /// Derives all four streams from one seed (distinct ChaCha stream ids).
    pub fn from_seed(seed: u64) -> Self {
        Self::from_seeds(seed, seed, seed, seed)
    }

    pub fn from_seeds(init: u64, dropout: u64, noise: u64, shuffle: u64) -> Self {
        RngStreams {
            init: stream(init, 0),
            dropout: stream(dropout, 1),
            noise: stream(noise, 2),
            shuffle: stream(shuffle, 3),
        }
    }
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}
