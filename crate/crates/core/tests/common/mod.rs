#![allow(dead_code)]

use rand::Rng;
use veclstm::nn::{seeded_rng, ParamBlocks, Tensor};

pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely against it.
pub const MAGNITUDE_FLOOR: f64 = 1e-3;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every parameter.
pub fn param_error<P: ParamBlocks + Clone>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64) -> f64 {
    let grads = analytic.blocks();
    let mut worst: f64 = 0.0;
    for (b, (_, g)) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let numeric = central_difference(
                |v| {
                    let mut p = params.clone();
                    p.blocks_mut()[b].data_mut()[j] = v;
                    loss(&p)
                },
                params.blocks()[b].1.data()[j],
            );
            worst = worst.max(rel_err(g.data()[j], numeric));
        }
    }
    worst
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every input element.
pub fn input_error(input: &[f64], analytic: &[f64], loss: impl Fn(&[f64]) -> f64) -> f64 {
    assert_eq!(input.len(), analytic.len());
    let mut worst: f64 = 0.0;
    for j in 0..input.len() {
        let numeric = central_difference(
            |v| {
                let mut x = input.to_vec();
                x[j] = v;
                loss(&x)
            },
            input[j],
        );
        worst = worst.max(rel_err(analytic[j], numeric));
    }
    worst
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    Tensor::from_vec(shape, random_vec(shape.iter().product(), seed)).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
