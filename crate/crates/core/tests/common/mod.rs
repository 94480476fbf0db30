#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrin_core::model::{ForwardSettings, Model, ModelDims};
use vrin_core::{Direction, MaskedBatch, TrainConfig, Variant};

/// Random batch with strictly increasing, irregular timestamps and at least
/// one observation per sample.
pub fn random_batch(seed: u64, samples: usize, steps: usize, features: usize, observed: f64) -> MaskedBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = samples * steps * features;
    let values: Vec<f64> = (0..cells).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut mask: Vec<f64> = (0..cells)
        .map(|_| if rng.random_bool(observed) { 1.0 } else { 0.0 })
        .collect();
    for n in 0..samples {
        mask[n * steps * features] = 1.0;
    }
    let mut times = Vec::with_capacity(samples * steps);
    for _ in 0..samples {
        let mut t = 0.0;
        for _ in 0..steps {
            times.push(t);
            t += rng.random_range(0.5..3.0);
        }
    }
    let labels = (0..samples).map(|i| (i % 2) as f64).collect();
    MaskedBatch::from_grid(steps, features, values, mask, times, labels).unwrap()
}

pub fn small_config(steps: usize, features: usize, direction: Direction, variant: Variant) -> TrainConfig {
    let mut c = TrainConfig::imputation(steps, features);
    c.hidden = 8;
    c.latent = 3;
    c.vae_hidden = vec![7, 4];
    c.direction = direction;
    c.variant = variant;
    c
}

pub fn model_for(config: &TrainConfig, seed: u64) -> (Model, ForwardSettings) {
    let model = Model::new(ModelDims::from_config(config), &mut ChaCha8Rng::seed_from_u64(seed));
    (model, ForwardSettings::from_config(config))
}

/// Replaces every bias (zero at initialization) with small random values.
pub fn randomize_biases(model: &mut Model, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model
        .store
        .iter()
        .filter(|(_, p)| p.tensor.shape().len() == 1)
        .map(|(id, _)| id)
        .collect();
    for id in ids {
        for v in model.store.tensor_mut(id).data_mut() {
            *v = rng.random_range(-0.3..0.3);
        }
    }
}
