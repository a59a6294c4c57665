//! LSTM cell and sequence layer.
//!
//! Each gate owns one `H × (F + H)` matrix acting on the concatenation
//! `z = [x_t; h_{t−1}]`:
//!
//! ```text
//! i_t = σ(W_i z + b_i)      f_t = σ(W_f z + b_f)      o_t = σ(W_o z + b_o)
//! g_t = tanh(W_g z + b_g)
//! c_t = f_t ⊙ c_{t−1} + i_t ⊙ g_t
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! Splitting each matrix column-wise as `[W_x | W_h]` gives the separate
//! input/recurrent form; it is the same set of parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::init::glorot_uniform;
use super::{ensure_finite, matvec_acc, outer_and_transpose_acc, shape_check, NnError, ParamBlocks, Result, Tensor};

/// Optional activation on the hidden state a layer *emits*. The recurrence
/// always carries the raw `h_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    None,
    Relu,
}

impl OutputActivation {
    #[inline]
    fn apply(self, h: f64) -> f64 {
        match self {
            OutputActivation::None => h,
            OutputActivation::Relu => h.max(0.0),
        }
    }

    #[inline]
    fn derivative(self, h: f64) -> f64 {
        match self {
            OutputActivation::None => 1.0,
            OutputActivation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_i: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub w_g: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
    pub b_g: Tensor,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let w = Tensor::zeros(&[hidden_size, input_size + hidden_size]);
        let b = Tensor::zeros(&[hidden_size]);
        LstmParams {
            input_size,
            hidden_size,
            w_i: w.clone(),
            w_f: w.clone(),
            w_o: w.clone(),
            w_g: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_o: b.clone(),
            b_g: b,
        }
    }

    /// Glorot-uniform gate matrices, zero biases.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let shape = [hidden_size, input_size + hidden_size];
        let (fan_in, fan_out) = (input_size + hidden_size, hidden_size);
        let mut p = LstmParams::zeros(input_size, hidden_size);
        p.w_i = glorot_uniform(&shape, fan_in, fan_out, rng);
        p.w_f = glorot_uniform(&shape, fan_in, fan_out, rng);
        p.w_o = glorot_uniform(&shape, fan_in, fan_out, rng);
        p.w_g = glorot_uniform(&shape, fan_in, fan_out, rng);
        p
    }

    /// Width of the concatenated `[x; h]` vector.
    pub fn concat_width(&self) -> usize {
        self.input_size + self.hidden_size
    }

    fn check(&self) -> Result<()> {
        let w = [self.hidden_size, self.concat_width()];
        let b = [self.hidden_size];
        for t in [&self.w_i, &self.w_f, &self.w_o, &self.w_g] {
            shape_check("lstm weight", &w, t.shape())?;
        }
        for t in [&self.b_i, &self.b_f, &self.b_o, &self.b_g] {
            shape_check("lstm bias", &b, t.shape())?;
        }
        Ok(())
    }
}

impl ParamBlocks for LstmParams {
    fn blocks(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_i".into(), &self.w_i),
            ("w_f".into(), &self.w_f),
            ("w_o".into(), &self.w_o),
            ("w_g".into(), &self.w_g),
            ("b_i".into(), &self.b_i),
            ("b_f".into(), &self.b_f),
            ("b_o".into(), &self.b_o),
            ("b_g".into(), &self.b_g),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_g,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// Everything one step's backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellCache {
    /// `[x_t; h_{t−1}]`
    pub z: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn lstm_cell_forward(
    x: &[f64],
    state: &LstmState,
    params: &LstmParams,
) -> Result<(LstmState, LstmCellCache)> {
    params.check()?;
    let hs = params.hidden_size;
    shape_check("lstm input", &[params.input_size], &[x.len()])?;
    shape_check("lstm hidden state", &[hs], &[state.h.len()])?;
    shape_check("lstm cell state", &[hs], &[state.c.len()])?;

    let mut z = Vec::with_capacity(params.concat_width());
    z.extend_from_slice(x);
    z.extend_from_slice(&state.h);

    let gate = |w: &Tensor, b: &Tensor| {
        let mut pre = b.data().to_vec();
        matvec_acc(w.data(), &z, &mut pre);
        pre
    };
    let mut i = gate(&params.w_i, &params.b_i);
    let mut f = gate(&params.w_f, &params.b_f);
    let mut o = gate(&params.w_o, &params.b_o);
    let mut g = gate(&params.w_g, &params.b_g);
    for k in 0..hs {
        i[k] = sigmoid(i[k]);
        f[k] = sigmoid(f[k]);
        o[k] = sigmoid(o[k]);
        g[k] = g[k].tanh();
    }
    let c: Vec<f64> = (0..hs).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hs).map(|k| o[k] * tanh_c[k]).collect();
    ensure_finite("lstm cell", &c)?;
    ensure_finite("lstm cell", &h)?;

    let cache = LstmCellCache {
        z,
        c_prev: state.c.clone(),
        i,
        f,
        o,
        g,
        c: c.clone(),
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Backward through one step.
///
/// `dh` and `dc` are the total gradients arriving at `h_t` and `c_t`.
/// Parameter gradients are added into `grads`; returns `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    params: &LstmParams,
    cache: &LstmCellCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let hs = params.hidden_size;
    if cache.z.len() != params.concat_width() || cache.c.len() != hs {
        return Err(NnError::StaleCache(format!(
            "cache built for width {} / hidden {}, parameters have {} / {}",
            cache.z.len(),
            cache.c.len(),
            params.concat_width(),
            hs
        )));
    }
    shape_check("lstm upstream dh", &[hs], &[dh.len()])?;
    shape_check("lstm upstream dc", &[hs], &[dc.len()])?;
    if grads.input_size != params.input_size || grads.hidden_size != hs {
        return Err(NnError::ShapeMismatch {
            context: "lstm gradient buffer",
            expected: vec![params.input_size, hs],
            found: vec![grads.input_size, grads.hidden_size],
        });
    }

    let mut da_i = vec![0.0; hs];
    let mut da_f = vec![0.0; hs];
    let mut da_o = vec![0.0; hs];
    let mut da_g = vec![0.0; hs];
    let mut dc_prev = vec![0.0; hs];
    for k in 0..hs {
        let (i, f, o, g, tc) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        da_o[k] = dh[k] * tc * o * (1.0 - o);
        da_i[k] = dct * g * i * (1.0 - i);
        da_f[k] = dct * cache.c_prev[k] * f * (1.0 - f);
        da_g[k] = dct * i * (1.0 - g * g);
        dc_prev[k] = dct * f;
    }

    let mut dz = vec![0.0; params.concat_width()];
    let pairs = [
        (&params.w_i, &mut grads.w_i, &mut grads.b_i, &da_i),
        (&params.w_f, &mut grads.w_f, &mut grads.b_f, &da_f),
        (&params.w_o, &mut grads.w_o, &mut grads.b_o, &da_o),
        (&params.w_g, &mut grads.w_g, &mut grads.b_g, &da_g),
    ];
    for (w, dw, db, da) in pairs {
        outer_and_transpose_acc(w.data(), dw.data_mut(), &cache.z, da, &mut dz);
        for (b, d) in db.data_mut().iter_mut().zip(da.iter()) {
            *b += d;
        }
    }
    let dh_prev = dz.split_off(params.input_size);
    Ok((dz, dh_prev, dc_prev))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmSequenceCache {
    pub input_size: usize,
    pub hidden_size: usize,
    pub return_sequences: bool,
    pub output_activation: OutputActivation,
    pub steps: Vec<LstmCellCache>,
    /// Raw hidden state per step, before the output activation.
    pub hidden: Vec<Vec<f64>>,
}

/// Runs a `T × F` sequence from a zero state.
///
/// Returns `T × H` when `return_sequences` is set, otherwise the last
/// emitted hidden state of shape `[H]`.
pub fn lstm_sequence(
    seq: &Tensor,
    params: &LstmParams,
    return_sequences: bool,
    output_activation: OutputActivation,
) -> Result<(Tensor, LstmSequenceCache)> {
    if seq.rank() != 2 || seq.shape()[1] != params.input_size || seq.shape()[0] == 0 {
        return Err(NnError::ShapeMismatch {
            context: "lstm sequence input",
            expected: vec![seq.shape().first().copied().unwrap_or(1).max(1), params.input_size],
            found: seq.shape().to_vec(),
        });
    }
    let steps = seq.shape()[0];
    let hs = params.hidden_size;
    let mut state = LstmState::zeros(hs);
    let mut cache = LstmSequenceCache {
        input_size: params.input_size,
        hidden_size: hs,
        return_sequences,
        output_activation,
        steps: Vec::with_capacity(steps),
        hidden: Vec::with_capacity(steps),
    };
    let mut emitted = Vec::with_capacity(if return_sequences { steps * hs } else { hs });
    for t in 0..steps {
        let (next, step_cache) = lstm_cell_forward(seq.row(t), &state, params)?;
        if return_sequences || t + 1 == steps {
            emitted.extend(next.h.iter().map(|&h| output_activation.apply(h)));
        }
        cache.hidden.push(next.h.clone());
        cache.steps.push(step_cache);
        state = next;
    }
    let out = if return_sequences {
        Tensor::from_vec(&[steps, hs], emitted)?
    } else {
        Tensor::vector(emitted)
    };
    Ok((out, cache))
}

/// Backpropagation through time, accumulating into `grads`.
///
/// `upstream` has the shape of the forward output. Returns the gradient with
/// respect to the input sequence, shape `T × F`.
pub fn lstm_backward_into(
    params: &LstmParams,
    cache: &LstmSequenceCache,
    upstream: &Tensor,
    grads: &mut LstmParams,
) -> Result<Tensor> {
    let steps = cache.steps.len();
    if steps == 0 {
        return Err(NnError::StaleCache("cache holds no forward steps".into()));
    }
    if cache.input_size != params.input_size || cache.hidden_size != params.hidden_size {
        return Err(NnError::StaleCache(format!(
            "cache built for ({}, {}), parameters are ({}, {})",
            cache.input_size, cache.hidden_size, params.input_size, params.hidden_size
        )));
    }
    let hs = params.hidden_size;
    let expected: Vec<usize> = if cache.return_sequences { vec![steps, hs] } else { vec![hs] };
    shape_check("lstm upstream gradient", &expected, upstream.shape())?;

    let mut dx = vec![0.0; steps * params.input_size];
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    for t in (0..steps).rev() {
        let upstream_t: Option<&[f64]> = if cache.return_sequences {
            Some(upstream.row(t))
        } else if t + 1 == steps {
            Some(upstream.data())
        } else {
            None
        };
        let mut dh = dh_next;
        if let Some(up) = upstream_t {
            for ((d, &u), &h) in dh.iter_mut().zip(up).zip(&cache.hidden[t]) {
                *d += u * cache.output_activation.derivative(h);
            }
        }
        let (dxt, dh_prev, dc_prev) = lstm_cell_backward(params, &cache.steps[t], &dh, &dc_next, grads)?;
        dx[t * params.input_size..(t + 1) * params.input_size].copy_from_slice(&dxt);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    Tensor::from_vec(&[steps, params.input_size], dx)
}

/// Allocating form of [`lstm_backward_into`]: returns `(param grads, input grad)`.
pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmSequenceCache,
    upstream: &Tensor,
) -> Result<(LstmParams, Tensor)> {
    let mut grads = LstmParams::zeros(params.input_size, params.hidden_size);
    let dx = lstm_backward_into(params, cache, upstream, &mut grads)?;
    Ok((grads, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::seeded_rng;

    #[test]
    fn zero_params_from_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let (s, cache) = lstm_cell_forward(&[1.0, -2.0, 0.5], &LstmState::zeros(2), &p).unwrap();
        assert_eq!(cache.i, vec![0.5, 0.5]);
        assert_eq!(cache.f, vec![0.5, 0.5]);
        assert_eq!(cache.o, vec![0.5, 0.5]);
        assert_eq!(cache.g, vec![0.0, 0.0]);
        assert_eq!(s.c, vec![0.0, 0.0]);
        assert_eq!(s.h, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_the_cell() {
        let p = LstmParams::zeros(1, 2);
        let prev = LstmState {
            h: vec![0.3, -0.1],
            c: vec![1.2, -0.8],
        };
        let (s, _) = lstm_cell_forward(&[0.7], &prev, &p).unwrap();
        for k in 0..2 {
            assert_eq!(s.c[k], 0.5 * prev.c[k]);
            assert_eq!(s.h[k], 0.5 * (0.5 * prev.c[k]).tanh());
        }
    }

    #[test]
    fn sequence_modes_agree_for_one_step() {
        let mut rng = seeded_rng(3);
        let p = LstmParams::init(2, 4, &mut rng);
        let seq = Tensor::from_vec(&[1, 2], vec![0.4, -0.9]).unwrap();
        let (all, _) = lstm_sequence(&seq, &p, true, OutputActivation::None).unwrap();
        let (last, _) = lstm_sequence(&seq, &p, false, OutputActivation::None).unwrap();
        assert_eq!(all.shape(), &[1, 4]);
        assert_eq!(last.shape(), &[4]);
        assert_eq!(all.data(), last.data());
    }

    #[test]
    fn zero_params_emit_zeros() {
        let p = LstmParams::zeros(3, 5);
        let seq = Tensor::from_vec(&[4, 3], (0..12).map(|v| v as f64 - 6.0).collect()).unwrap();
        let (out, _) = lstm_sequence(&seq, &p, true, OutputActivation::None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = seeded_rng(5);
        let p = LstmParams::init(3, 4, &mut rng);
        let seq = Tensor::from_vec(&[5, 3], (0..15).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
        let (out, cache) = lstm_sequence(&seq, &p, true, OutputActivation::None).unwrap();
        let (grads, dx) = lstm_backward(&p, &cache, &out.zeros_like()).unwrap();
        assert!(grads.blocks().iter().all(|(_, t)| t.data().iter().all(|&v| v == 0.0)));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = seeded_rng(5);
        let small = LstmParams::init(2, 3, &mut rng);
        let big = LstmParams::init(2, 4, &mut rng);
        let seq = Tensor::from_vec(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (out, cache) = lstm_sequence(&seq, &small, false, OutputActivation::None).unwrap();
        assert!(matches!(
            lstm_backward(&big, &cache, &Tensor::vector(vec![0.0; 4])),
            Err(NnError::StaleCache(_))
        ));
        let mut empty = cache.clone();
        empty.steps.clear();
        assert!(matches!(lstm_backward(&small, &empty, &out), Err(NnError::StaleCache(_))));
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(2, 3);
        assert!(matches!(
            lstm_cell_forward(&[1.0], &LstmState::zeros(3), &p),
            Err(NnError::ShapeMismatch { .. })
        ));
        let seq = Tensor::from_vec(&[2, 3], vec![0.0; 6]).unwrap();
        assert!(matches!(
            lstm_sequence(&seq, &p, false, OutputActivation::None),
            Err(NnError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn relu_output_only_affects_emitted_values() {
        let mut rng = seeded_rng(9);
        let p = LstmParams::init(2, 6, &mut rng);
        let seq = Tensor::from_vec(&[3, 2], vec![0.5, -1.0, 1.5, 0.2, -0.7, 0.9]).unwrap();
        let (plain, cache) = lstm_sequence(&seq, &p, true, OutputActivation::None).unwrap();
        let (relu, _) = lstm_sequence(&seq, &p, true, OutputActivation::Relu).unwrap();
        for (a, b) in plain.data().iter().zip(relu.data()) {
            assert_eq!(a.max(0.0), *b);
        }
        assert_eq!(cache.hidden.concat(), plain.data());
    }
}
