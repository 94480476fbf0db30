mod common;

use common::{model_for, random_batch, randomize_biases, small_config};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrin_core::gradcheck::grad_check;
use vrin_core::vae::{Noise, Stochasticity};
use vrin_core::{Direction, Variant};

fn check(direction: Direction, variant: Variant, seed: u64) -> f64 {
    let (n, t, d) = (4, 6, 5);
    let batch = random_batch(seed, n, t, d, 0.6);
    let config = small_config(t, d, direction, variant);
    let (mut model, settings) = model_for(&config, seed);
    randomize_biases(&mut model, seed + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let eps: Vec<f64> = (0..t * n * config.latent).map(|_| rng.random_range(-1.0..1.0)).collect();

    grad_check(&model.store, 1e-5, |store, g| {
        let stoch = Stochasticity {
            dropout: None,
            noise: Noise::Fixed(&eps),
        };
        model.forward_in(g, store, &batch, &settings, stoch).map(|f| f.loss)
    })
    .unwrap()
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for (dir, var) in [
        (Direction::Uni, Variant::VRinFull),
        (Direction::Bi, Variant::VRinFull),
        (Direction::Uni, Variant::VRin),
        (Direction::Bi, Variant::VRin),
    ] {
        let err = check(dir, var, 11);
        assert!(err < 1e-5, "{dir:?}/{var:?}: worst relative error {err:e}");
    }
}

#[test]
fn every_parameter_receives_gradient_in_full_bidirectional_mode() {
    let batch = random_batch(3, 4, 6, 5, 0.6);
    let config = small_config(6, 5, Direction::Bi, Variant::VRinFull);
    let (mut model, settings) = model_for(&config, 3);
    randomize_biases(&mut model, 4);
    let (g, f) = model.forward(&batch, &settings, Stochasticity::eval()).unwrap();
    let grads = g.backward(f.loss).unwrap().param_grads(&g, &model.store);
    for (id, p) in model.store.iter() {
        let norm: f64 = grads.get(id).iter().map(|x| x.abs()).sum();
        assert!(norm > 0.0, "{} got no gradient", p.name);
    }
}
