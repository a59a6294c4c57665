//! A small double-precision layer library with hand-derived backward passes.
//!
//! Every layer exposes a forward function returning its output plus whatever
//! it needs to remember, and a backward function that *accumulates* parameter
//! gradients into a caller-owned buffer of the same parameter type. Batches
//! are handled by the caller, one sample at a time, so gradient sums always
//! accumulate in a fixed sample order.

mod activation;
mod checkpoint;
mod conv;
mod dense;
mod init;
mod loss;
mod lstm;
mod pool;
mod tensor;

pub use activation::{activate, activation_derivative, Activation};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{conv1d_backward, conv1d_forward, Conv1dParams};
pub use dense::{dense_backward, dense_forward, DenseParams};
pub use init::{glorot_bound, glorot_uniform, seeded_rng};
pub use loss::{softmax, softmax_cross_entropy, CrossEntropy};
pub use lstm::{
    lstm_backward, lstm_backward_into, lstm_cell_backward, lstm_cell_forward, lstm_sequence,
    LstmCellCache, LstmParams, LstmSequenceCache, LstmState, OutputActivation,
};
pub use pool::{maxpool1d_backward, maxpool1d_forward, PoolCache};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("cache does not match the parameters or gradient it is used with: {0}")]
    StaleCache(String),
    #[error("input of length {len} is shorter than kernel width {kernel}")]
    InputTooShort { len: usize, kernel: usize },
    #[error("invalid one-hot target")]
    InvalidTarget,
    #[error("invalid parameter configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

pub(crate) fn shape_check(context: &'static str, expected: &[usize], found: &[usize]) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch {
            context,
            expected: expected.to_vec(),
            found: found.to_vec(),
        })
    }
}

pub(crate) fn ensure_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite(context))
    }
}

/// A set of named parameter tensors, visited in a fixed order.
///
/// Gradients use the same type as the parameters they belong to, so Adam and
/// checkpointing can walk both in lockstep.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<(String, &Tensor)>;
    fn blocks_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, t)| t.len()).sum()
    }

    fn zero_grad(&mut self) {
        for t in self.blocks_mut() {
            t.fill(0.0);
        }
    }
}

/// Computes `out[r] += Σ_c w[r, c] · x[c]` for a row-major `rows × x.len()` matrix.
#[inline]
pub(crate) fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates `w += dy ⊗ x` and `dx += wᵀ dy` in one pass.
#[inline]
pub(crate) fn outer_and_transpose_acc(
    w: &[f64],
    dw: &mut [f64],
    x: &[f64],
    dy: &[f64],
    dx: &mut [f64],
) {
    let cols = x.len();
    for ((row, drow), &g) in w.chunks_exact(cols).zip(dw.chunks_exact_mut(cols)).zip(dy) {
        if g == 0.0 {
            continue;
        }
        for ((d, &xv), (dxv, &wv)) in drow.iter_mut().zip(x).zip(dx.iter_mut().zip(row)) {
            *d += g * xv;
            *dxv += g * wv;
        }
    }
}
