#![allow(dead_code)]

use chanpred::nn::{loss_mse, Activation, MlpModel};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

/// Smallest |pre-activation| over hidden units; ReLU kinks closer than the
/// finite-difference step make the numeric derivative meaningless.
pub fn min_hidden_preactivation(model: &MlpModel, x: ArrayView2<'_, f64>) -> f64 {
    let mut a = x.to_owned();
    let mut min = f64::INFINITY;
    let hidden = model.layers.len() - 1;
    for layer in &model.layers[..hidden] {
        let z = a.dot(&layer.weight.t()) + &layer.bias;
        min = z.iter().fold(min, |m, v| m.min(v.abs()));
        a = match model.activation {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Tanh => z.mapv(f64::tanh),
        };
    }
    min
}

fn loss(model: &MlpModel, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    loss_mse(model.predict(x).unwrap().view(), y).unwrap()
}

/// Largest relative error between backprop and central differences over
/// every weight and bias. Denominators are floored at `floor` so that
/// coordinates with vanishing gradient are compared absolutely.
pub fn max_gradient_error(model: &MlpModel, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, step: f64, floor: f64) -> f64 {
    let (_, grads) = model.backward(x, y).unwrap();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        worst = worst.max(err);
    };
    for (k, g) in grads.iter().enumerate() {
        for ((i, j), &analytic) in g.weight.indexed_iter() {
            let orig = probe.layers[k].weight[[i, j]];
            probe.layers[k].weight[[i, j]] = orig + step;
            let up = loss(&probe, x, y);
            probe.layers[k].weight[[i, j]] = orig - step;
            let down = loss(&probe, x, y);
            probe.layers[k].weight[[i, j]] = orig;
            compare(analytic, (up - down) / (2.0 * step));
        }
        for (i, &analytic) in g.bias.iter().enumerate() {
            let orig = probe.layers[k].bias[i];
            probe.layers[k].bias[i] = orig + step;
            let up = loss(&probe, x, y);
            probe.layers[k].bias[i] = orig - step;
            let down = loss(&probe, x, y);
            probe.layers[k].bias[i] = orig;
            compare(analytic, (up - down) / (2.0 * step));
        }
    }
    worst
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}
