use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::nn::ParamBlocks;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment buffers, one per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<P: ParamBlocks>(params: &P) -> Self {
        let sizes: Vec<usize> = params.blocks().iter().map(|(_, t)| t.len()).collect();
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// Updates one flat parameter slice at step `t` (already incremented).
///
/// ```text
/// m ← β1 m + (1 − β1) g          v ← β2 v + (1 − β2) g²
/// m̂ = m / (1 − β1ᵗ)              v̂ = v / (1 − β2ᵗ)
/// θ ← θ − α m̂ / (√v̂ + ε)
/// ```
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let bias1 = 1.0 - cfg.beta1.powf(t as f64);
    let bias2 = 1.0 - cfg.beta2.powf(t as f64);
    for (((w, &g), m), v) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

pub fn adam_step<P: ParamBlocks>(params: &mut P, grads: &P, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let grad_blocks = grads.blocks();
    let mut param_blocks = params.blocks_mut();
    if grad_blocks.len() != param_blocks.len() || state.m.len() != param_blocks.len() {
        return Err(TrainError::ShapeMismatch { block: param_blocks.len().min(grad_blocks.len()) });
    }
    for (k, (p, (_, g))) in param_blocks.iter_mut().zip(&grad_blocks).enumerate() {
        if p.shape() != g.shape() || state.m[k].len() != p.len() {
            return Err(TrainError::ShapeMismatch { block: k });
        }
    }
    state.t += 1;
    for (k, (p, (_, g))) in param_blocks.into_iter().zip(grad_blocks).enumerate() {
        adam_update(p.data_mut(), g.data(), &mut state.m[k], &mut state.v[k], state.t, cfg);
    }
    Ok(())
}
