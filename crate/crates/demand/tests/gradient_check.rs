use ndarray::{Array1, Array2};
use pricewise_demand::lstm::Lstm;
use pricewise_demand::mlp::Mlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Replaces every parameter with a uniform draw so no block sits at its
/// initial value.
fn randomize(params: &mut [f64], rng: &mut ChaCha8Rng, set: impl FnOnce(&[f64])) {
    params.iter_mut().for_each(|p| *p = rng.random_range(-0.8..0.8));
    set(params);
}

/// Largest relative error between `analytic` and central differences of
/// `loss` around `params`.
fn max_relative_error(params: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            probe[i] = params[i] + STEP;
            let up = loss(&probe);
            probe[i] = params[i] - STEP;
            let down = loss(&probe);
            probe[i] = params[i];
            relative_error(analytic[i], (up - down) / (2.0 * STEP))
        })
        .fold(0.0, f64::max)
}

#[test]
fn mlp_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Mlp::init(4, 6, 0.01, &mut rng);
        randomize(&mut model.params_flat(), &mut rng, |p| model.set_params_flat(p));
        let z = Array2::from_shape_simple_fn((5, 4), || rng.random_range(-2.0..2.0));
        let t = Array1::from_shape_simple_fn(5, || rng.random_range(-1.0..1.0));
        let (_, grads) = model.loss_and_gradients(z.view(), t.view());
        let mut probe = model.clone();
        let err = max_relative_error(&model.params_flat(), &grads.flatten(), |p| {
            probe.set_params_flat(p);
            probe.loss_and_gradients(z.view(), t.view()).0
        });
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn lstm_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut model = Lstm::init(3, 4, 3, &mut rng);
        randomize(&mut model.params_flat(), &mut rng, |p| model.set_params_flat(p));
        let steps: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_simple_fn((2, 3), || rng.random_range(-1.5..1.5)))
            .collect();
        let t = Array1::from_shape_simple_fn(2, || rng.random_range(-1.0..1.0));
        let (_, grads) = model.loss_and_gradients(&steps, t.view());
        let mut probe = model.clone();
        let err = max_relative_error(&model.params_flat(), &grads.flatten(), |p| {
            probe.set_params_flat(p);
            probe.loss_and_gradients(&steps, t.view()).0
        });
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}
