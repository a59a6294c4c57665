use rand::Rng;

use super::init::glorot_uniform;
use super::{ensure_finite, matvec_acc, outer_and_transpose_acc, shape_check, ParamBlocks, Result, Tensor};

/// Fully connected layer `y = W x + b`, with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseParams {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        DenseParams {
            weight: glorot_uniform(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }
}

impl ParamBlocks for DenseParams {
    fn blocks(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn dense_forward(input: &[f64], params: &DenseParams) -> Result<Vec<f64>> {
    shape_check("dense input", &[params.inputs()], &[input.len()])?;
    shape_check("dense bias", &[params.outputs()], params.bias.shape())?;
    let mut out = params.bias.data().to_vec();
    matvec_acc(params.weight.data(), input, &mut out);
    ensure_finite("dense", &out)?;
    Ok(out)
}

/// Adds `dW = dy ⊗ x`, `db = dy` into `grads`; returns `dx = Wᵀ dy`.
pub fn dense_backward(
    input: &[f64],
    params: &DenseParams,
    upstream: &[f64],
    grads: &mut DenseParams,
) -> Result<Vec<f64>> {
    shape_check("dense input", &[params.inputs()], &[input.len()])?;
    shape_check("dense upstream gradient", &[params.outputs()], &[upstream.len()])?;
    shape_check("dense gradient buffer", params.weight.shape(), grads.weight.shape())?;
    let mut dx = vec![0.0; input.len()];
    outer_and_transpose_acc(params.weight.data(), grads.weight.data_mut(), input, upstream, &mut dx);
    for (b, g) in grads.bias.data_mut().iter_mut().zip(upstream) {
        *b += g;
    }
    Ok(dx)
}
