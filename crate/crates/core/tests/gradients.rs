//! Every backward pass against central finite differences.

mod common;

use common::*;
use veclstm::models::{build_hybrid_with, build_lstm_stack, model_backward, Batch, GridBranch, HybridSizes, ModelParams};
use veclstm::nn::*;

const NONLINEAR_TOL: f64 = 1e-4;
const LINEAR_TOL: f64 = 1e-6;

#[test]
fn dense() {
    check_dense();
}

pub fn check_dense() {
    let mut rng = seeded_rng(1);
    let params = DenseParams::init(5, 4, &mut rng);
    let x = random_vec(5, 2);
    let r = random_vec(4, 3);
    let loss = |p: &DenseParams, x: &[f64]| dot(&dense_forward(x, p).unwrap(), &r);
    let mut grads = DenseParams::zeros(5, 4);
    let dx = dense_backward(&x, &params, &r, &mut grads).unwrap();
    assert!(param_error(&params, &grads, |p| loss(p, &x)) < LINEAR_TOL);
    assert!(input_error(&x, &dx, |x| loss(&params, x)) < LINEAR_TOL);
}

#[test]
fn conv1d() {
    check_conv1d();
}

pub fn check_conv1d() {
    let mut rng = seeded_rng(4);
    let params = Conv1dParams::init(4, 3, 3, &mut rng).unwrap();
    let x = random_tensor(&[7, 3], 5);
    let r = random_vec(5 * 4, 6);
    let loss = |p: &Conv1dParams, x: &Tensor| dot(conv1d_forward(x, p).unwrap().data(), &r);
    let upstream = Tensor::from_vec(&[5, 4], r.clone()).unwrap();
    let mut grads = Conv1dParams::zeros(4, 3, 3).unwrap();
    let dx = conv1d_backward(&x, &params, &upstream, &mut grads).unwrap();
    assert!(param_error(&params, &grads, |p| loss(p, &x)) < LINEAR_TOL);
    let err = input_error(x.data(), dx.data(), |v| loss(&params, &Tensor::from_vec(&[7, 3], v.to_vec()).unwrap()));
    assert!(err < LINEAR_TOL);
}

#[test]
fn maxpool() {
    check_maxpool();
}

pub fn check_maxpool() {
    let x = random_tensor(&[8, 3], 7);
    let r = random_vec(4 * 3, 8);
    let (_, cache) = maxpool1d_forward(&x, 2).unwrap();
    let dx = maxpool1d_backward(&cache, &Tensor::from_vec(&[4, 3], r.clone()).unwrap()).unwrap();
    let err = input_error(x.data(), dx.data(), |v| {
        let t = Tensor::from_vec(&[8, 3], v.to_vec()).unwrap();
        dot(maxpool1d_forward(&t, 2).unwrap().0.data(), &r)
    });
    assert!(err < LINEAR_TOL);
}

#[test]
fn softmax_cross_entropy_logits() {
    check_softmax_cross_entropy_logits();
}

pub fn check_softmax_cross_entropy_logits() {
    let logits = random_vec(7, 9).iter().map(|v| 3.0 * v).collect::<Vec<_>>();
    let mut target = vec![0.0; 7];
    target[2] = 1.0;
    let ce = softmax_cross_entropy(&logits, &target).unwrap();
    let err = input_error(&logits, &ce.grad, |z| softmax_cross_entropy(z, &target).unwrap().loss);
    assert!(err < NONLINEAR_TOL);
}

#[test]
fn lstm_cell() {
    check_lstm_cell();
}

pub fn check_lstm_cell() {
    let mut rng = seeded_rng(10);
    let params = LstmParams::init(3, 4, &mut rng);
    let x = random_vec(3, 11);
    let state = LstmState {
        h: random_vec(4, 12),
        c: random_vec(4, 13),
    };
    let (rh, rc) = (random_vec(4, 14), random_vec(4, 15));
    let loss = |p: &LstmParams, x: &[f64], s: &LstmState| {
        let (next, _) = lstm_cell_forward(x, s, p).unwrap();
        dot(&next.h, &rh) + dot(&next.c, &rc)
    };
    let (_, cache) = lstm_cell_forward(&x, &state, &params).unwrap();
    let mut grads = LstmParams::zeros(3, 4);
    let (dx, dh, dc) = lstm_cell_backward(&params, &cache, &rh, &rc, &mut grads).unwrap();
    assert!(param_error(&params, &grads, |p| loss(p, &x, &state)) < NONLINEAR_TOL);
    assert!(input_error(&x, &dx, |x| loss(&params, x, &state)) < NONLINEAR_TOL);
    let err_h = input_error(&state.h, &dh, |h| {
        loss(&params, &x, &LstmState { h: h.to_vec(), c: state.c.clone() })
    });
    let err_c = input_error(&state.c, &dc, |c| {
        loss(&params, &x, &LstmState { h: state.h.clone(), c: c.to_vec() })
    });
    assert!(err_h < NONLINEAR_TOL && err_c < NONLINEAR_TOL);
}

fn check_sequence(return_sequences: bool, act: OutputActivation, seed: u64) {
    let mut rng = seeded_rng(seed);
    let params = LstmParams::init(3, 5, &mut rng);
    let seq = random_tensor(&[4, 3], seed + 1);
    let out_len = if return_sequences { 4 * 5 } else { 5 };
    let r = random_vec(out_len, seed + 2);
    let loss = |p: &LstmParams, s: &Tensor| dot(lstm_sequence(s, p, return_sequences, act).unwrap().0.data(), &r);
    let (out, cache) = lstm_sequence(&seq, &params, return_sequences, act).unwrap();
    let upstream = Tensor::from_vec(out.shape(), r.clone()).unwrap();
    let (grads, dx) = lstm_backward(&params, &cache, &upstream).unwrap();
    assert!(param_error(&params, &grads, |p| loss(p, &seq)) < NONLINEAR_TOL);
    let err = input_error(seq.data(), dx.data(), |v| loss(&params, &Tensor::from_vec(&[4, 3], v.to_vec()).unwrap()));
    assert!(err < NONLINEAR_TOL);
}

#[test]
fn lstm_bptt_last_output() {
    check_lstm_bptt_last_output();
}

pub fn check_lstm_bptt_last_output() {
    check_sequence(false, OutputActivation::None, 20);
}

#[test]
fn lstm_bptt_all_outputs() {
    check_lstm_bptt_all_outputs();
}

pub fn check_lstm_bptt_all_outputs() {
    check_sequence(true, OutputActivation::None, 30);
}

#[test]
fn lstm_bptt_relu_outputs() {
    check_lstm_bptt_relu_outputs();
}

pub fn check_lstm_bptt_relu_outputs() {
    check_sequence(true, OutputActivation::Relu, 40);
}

fn batch_of(spec: &veclstm::models::ModelSpec, n: usize, seed: u64) -> Batch {
    let grid_width = spec.grid.map(|g| g.input_width());
    let mut batch = Batch::new(spec.seq_width(), grid_width);
    for i in 0..n {
        let seq = random_vec(spec.seq_width(), seed + i as u64);
        let grid = grid_width.map(|w| random_vec(w, seed + 100 + i as u64));
        batch.push(&seq, grid.as_deref());
    }
    batch
}

#[test]
fn hybrid_model_reduced() {
    check_hybrid_model_reduced();
}

pub fn check_hybrid_model_reduced() {
    let spec = build_hybrid_with(&HybridSizes {
        features: 2,
        lstm_units: vec![4, 3],
        grid: GridBranch {
            grid_size: 5,
            filters: 3,
            kernel: 3,
            pool: 1,
        },
        fusion_units: 6,
    });
    let params = ModelParams::init(&spec, 50).unwrap();
    let batch = batch_of(&spec, 3, 60);
    let labels = [0, 4, 6];
    let (_, grads) = model_backward(&spec, &params, &batch, &labels).unwrap();
    let err = param_error(&params, &grads, |p| model_backward(&spec, p, &batch, &labels).unwrap().0);
    assert!(err < NONLINEAR_TOL, "{err}");
}

#[test]
fn lstm_stack_model_reduced() {
    check_lstm_stack_model_reduced();
}

pub fn check_lstm_stack_model_reduced() {
    let mut spec = build_lstm_stack(3);
    spec.lstm_units = vec![5, 4];
    spec.timesteps = 2;
    let params = ModelParams::init(&spec, 70).unwrap();
    let batch = batch_of(&spec, 4, 80);
    let labels = [1, 1, 3, 5];
    let (_, grads) = model_backward(&spec, &params, &batch, &labels).unwrap();
    let err = param_error(&params, &grads, |p| model_backward(&spec, p, &batch, &labels).unwrap().0);
    assert!(err < NONLINEAR_TOL, "{err}");
}

#[test]
fn checker_catches_a_wrong_gradient() {
    check_checker_catches_a_wrong_gradient();
}

pub fn check_checker_catches_a_wrong_gradient() {
    let mut rng = seeded_rng(90);
    let params = DenseParams::init(3, 2, &mut rng);
    let x = random_vec(3, 91);
    let r = random_vec(2, 92);
    let mut grads = DenseParams::zeros(3, 2);
    dense_backward(&x, &params, &r, &mut grads).unwrap();
    grads.weight.data_mut()[4] *= 1.001;
    let err = param_error(&params, &grads, |p| dot(&dense_forward(&x, p).unwrap(), &r));
    assert!(err > LINEAR_TOL);
}
