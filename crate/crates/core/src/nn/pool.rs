use super::{shape_check, NnError, Result, Tensor};

/// Argmax bookkeeping from a max-pool forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCache {
    pub input_shape: Vec<usize>,
    /// For every output element, the flat index of the input element it copied.
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling along the row axis of an `L × C` input.
///
/// Output is `⌊L / pool⌋ × C`; trailing rows that do not fill a window are
/// dropped. Ties pick the first row.
pub fn maxpool1d_forward(input: &Tensor, pool: usize) -> Result<(Tensor, PoolCache)> {
    if pool == 0 {
        return Err(NnError::InvalidConfig("pool size must be at least 1".into()));
    }
    if input.rank() != 2 {
        return Err(NnError::ShapeMismatch {
            context: "maxpool1d input",
            expected: vec![0, 0],
            found: input.shape().to_vec(),
        });
    }
    let (len, channels) = (input.shape()[0], input.shape()[1]);
    let out_len = len / pool;
    let x = input.data();
    let mut out = Vec::with_capacity(out_len * channels);
    let mut argmax = Vec::with_capacity(out_len * channels);
    for t in 0..out_len {
        for c in 0..channels {
            let mut best = (t * pool) * channels + c;
            for r in t * pool + 1..(t + 1) * pool {
                let idx = r * channels + c;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            out.push(x[best]);
            argmax.push(best);
        }
    }
    Ok((
        Tensor::from_vec(&[out_len, channels], out)?,
        PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool1d_backward(cache: &PoolCache, upstream: &Tensor) -> Result<Tensor> {
    shape_check("maxpool1d upstream gradient", &[cache.argmax.len()], &[upstream.len()])?;
    let mut dx = Tensor::zeros(&cache.input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(upstream.data()) {
        d[idx] += g;
    }
    Ok(dx)
}
