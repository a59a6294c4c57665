//! 1D convolution over an `L × C_in` input (rows are the sequence axis).
//!
//! Cross-correlation with stride 1 and valid padding:
//! `out[t, k] = b[k] + Σ_c Σ_j in[t + j, c] · w[k, c, j]`, giving
//! `(L − width + 1) × K`.

use rand::Rng;

use super::init::glorot_uniform;
use super::{ensure_finite, shape_check, NnError, ParamBlocks, Result, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams {
    /// `[filters, in_channels, width]`
    pub kernels: Tensor,
    /// `[filters]`
    pub bias: Tensor,
}

impl Conv1dParams {
    pub fn zeros(filters: usize, in_channels: usize, width: usize) -> Result<Self> {
        if filters == 0 || width == 0 || in_channels == 0 {
            return Err(NnError::InvalidConfig(format!(
                "conv1d needs filters, channels and width ≥ 1 (got {filters}, {in_channels}, {width})"
            )));
        }
        Ok(Conv1dParams {
            kernels: Tensor::zeros(&[filters, in_channels, width]),
            bias: Tensor::zeros(&[filters]),
        })
    }

    pub fn init<R: Rng>(filters: usize, in_channels: usize, width: usize, rng: &mut R) -> Result<Self> {
        let mut p = Conv1dParams::zeros(filters, in_channels, width)?;
        p.kernels = glorot_uniform(&[filters, in_channels, width], in_channels * width, filters * width, rng);
        Ok(p)
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        (input_len >= self.width()).then(|| input_len - self.width() + 1)
    }
}

impl ParamBlocks for Conv1dParams {
    fn blocks(&self) -> Vec<(String, &Tensor)> {
        vec![("kernels".into(), &self.kernels), ("bias".into(), &self.bias)]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

fn check_input(input: &Tensor, params: &Conv1dParams) -> Result<(usize, usize)> {
    if input.rank() != 2 || input.shape()[1] != params.in_channels() {
        return Err(NnError::ShapeMismatch {
            context: "conv1d input",
            expected: vec![input.shape().first().copied().unwrap_or(0), params.in_channels()],
            found: input.shape().to_vec(),
        });
    }
    let len = input.shape()[0];
    let out_len = params.output_len(len).ok_or(NnError::InputTooShort {
        len,
        kernel: params.width(),
    })?;
    Ok((len, out_len))
}

pub fn conv1d_forward(input: &Tensor, params: &Conv1dParams) -> Result<Tensor> {
    let (_, out_len) = check_input(input, params)?;
    let (filters, channels, width) = (params.filters(), params.in_channels(), params.width());
    let x = input.data();
    let w = params.kernels.data();
    let mut out = vec![0.0; out_len * filters];
    for t in 0..out_len {
        let window = &x[t * channels..(t + width) * channels];
        for k in 0..filters {
            let kernel = &w[k * channels * width..(k + 1) * channels * width];
            let mut acc = params.bias.data()[k];
            for j in 0..width {
                for c in 0..channels {
                    acc += window[j * channels + c] * kernel[c * width + j];
                }
            }
            out[t * filters + k] = acc;
        }
    }
    ensure_finite("conv1d", &out)?;
    Tensor::from_vec(&[out_len, filters], out)
}

/// Adds kernel and bias gradients into `grads` and returns the input gradient.
pub fn conv1d_backward(
    input: &Tensor,
    params: &Conv1dParams,
    upstream: &Tensor,
    grads: &mut Conv1dParams,
) -> Result<Tensor> {
    let (len, out_len) = check_input(input, params)?;
    let (filters, channels, width) = (params.filters(), params.in_channels(), params.width());
    shape_check("conv1d upstream gradient", &[out_len, filters], upstream.shape())?;
    shape_check("conv1d gradient buffer", params.kernels.shape(), grads.kernels.shape())?;
    let x = input.data();
    let w = params.kernels.data();
    let dy = upstream.data();
    let mut dx = vec![0.0; len * channels];
    let dw = grads.kernels.data_mut();
    for t in 0..out_len {
        for k in 0..filters {
            let g = dy[t * filters + k];
            if g == 0.0 {
                continue;
            }
            let base = k * channels * width;
            for j in 0..width {
                let row = (t + j) * channels;
                for c in 0..channels {
                    dw[base + c * width + j] += g * x[row + c];
                    dx[row + c] += g * w[base + c * width + j];
                }
            }
        }
    }
    let db = grads.bias.data_mut();
    for t in 0..out_len {
        for k in 0..filters {
            db[k] += dy[t * filters + k];
        }
    }
    Tensor::from_vec(&[len, channels], dx)
}
