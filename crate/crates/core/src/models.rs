//! The three evaluated architectures and whole-model forward/backward.
//!
//! * `LSTM_BASELINE` and `VECLSTM`: `LSTM(100, sequences) → LSTM(50) → Dense(7) → softmax`
//!   over a `(1, F)` input. They are the same network; they differ only in
//!   how their input features are produced.
//! * `HYBRID`: the same LSTM stack on the metadata input, concatenated with a
//!   convolutional branch over the `G × G` heatmap
//!   (`Conv1d(64, k=3, ReLU) → MaxPool1d(1) → flatten`), followed by
//!   `Dense(64, ReLU) → Dense(7) → softmax`.
//!
//! The heatmap enters the convolution with its rows as the sequence axis and
//! its columns as channels.

use serde::{Deserialize, Serialize};

use crate::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, lstm_backward_into, lstm_sequence,
    maxpool1d_backward, maxpool1d_forward, seeded_rng, softmax, softmax_cross_entropy, Conv1dParams,
    DenseParams, LstmParams, LstmSequenceCache, NnError, OutputActivation, ParamBlocks, PoolCache, Result,
    Tensor,
};

pub const NUM_CLASSES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "LSTM_BASELINE")]
    LstmBaseline,
    #[serde(rename = "VECLSTM")]
    VecLstm,
    #[serde(rename = "HYBRID")]
    Hybrid,
}

impl Architecture {
    pub fn cli_name(self) -> &'static str {
        match self {
            Architecture::LstmBaseline => "lstm",
            Architecture::VecLstm => "veclstm",
            Architecture::Hybrid => "hybrid",
        }
    }

    pub fn from_cli_name(name: &str) -> Option<Self> {
        match name {
            "lstm" => Some(Architecture::LstmBaseline),
            "veclstm" => Some(Architecture::VecLstm),
            "hybrid" => Some(Architecture::Hybrid),
            _ => None,
        }
    }
}

/// Convolutional branch over the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridBranch {
    pub grid_size: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
}

impl Default for GridBranch {
    fn default() -> Self {
        GridBranch {
            grid_size: 10,
            filters: 64,
            kernel: 3,
            pool: 1,
        }
    }
}

impl GridBranch {
    /// Flattened width after convolution and pooling.
    pub fn output_width(&self) -> usize {
        (self.grid_size + 1).saturating_sub(self.kernel) / self.pool.max(1) * self.filters
    }

    pub fn input_width(&self) -> usize {
        self.grid_size * self.grid_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub timesteps: usize,
    pub features: usize,
    pub lstm_units: Vec<usize>,
    #[serde(default)]
    pub lstm_output_activation: OutputActivation,
    pub grid: Option<GridBranch>,
    pub fusion_units: Option<usize>,
    pub classes: usize,
}

/// One entry of the human-readable layer listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Lstm {
        branch: String,
        units: usize,
        return_sequences: bool,
        output_activation: OutputActivation,
    },
    Conv1d {
        branch: String,
        filters: usize,
        kernel: usize,
        activation: String,
    },
    MaxPool1d {
        branch: String,
        pool: usize,
    },
    Flatten {
        branch: String,
        width: usize,
    },
    Concatenate {
        width: usize,
    },
    Dense {
        units: usize,
        activation: String,
    },
}

/// The JSON description written next to trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub architecture: Architecture,
    pub seed: u64,
    pub input: InputDescriptor,
    pub layers: Vec<LayerSpec>,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDescriptor {
    pub timesteps: usize,
    pub features: usize,
    pub grid_size: Option<usize>,
}

/// Layer sizes for a hybrid model.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSizes {
    pub features: usize,
    pub lstm_units: Vec<usize>,
    pub grid: GridBranch,
    pub fusion_units: usize,
}

impl Default for HybridSizes {
    fn default() -> Self {
        HybridSizes {
            features: 1,
            lstm_units: vec![100, 50],
            grid: GridBranch::default(),
            fusion_units: 64,
        }
    }
}

fn lstm_stack(architecture: Architecture, features: usize) -> ModelSpec {
    ModelSpec {
        architecture,
        timesteps: 1,
        features,
        lstm_units: vec![100, 50],
        lstm_output_activation: OutputActivation::None,
        grid: None,
        fusion_units: None,
        classes: NUM_CLASSES,
    }
}

/// `LSTM(100) → LSTM(50) → Dense(7)` over `(1, features)`.
pub fn build_lstm_stack(features: usize) -> ModelSpec {
    lstm_stack(Architecture::LstmBaseline, features)
}

/// Same network as [`build_lstm_stack`], labelled `VECLSTM`.
pub fn build_veclstm(features: usize) -> ModelSpec {
    lstm_stack(Architecture::VecLstm, features)
}

/// The hybrid LSTM + CNN model at default sizes with one metadata feature.
pub fn build_hybrid() -> ModelSpec {
    build_hybrid_with(&HybridSizes::default())
}

pub fn build_hybrid_with(sizes: &HybridSizes) -> ModelSpec {
    ModelSpec {
        architecture: Architecture::Hybrid,
        timesteps: 1,
        features: sizes.features,
        lstm_units: sizes.lstm_units.clone(),
        lstm_output_activation: OutputActivation::None,
        grid: Some(sizes.grid),
        fusion_units: Some(sizes.fusion_units),
        classes: NUM_CLASSES,
    }
}

/// Closed-form parameter count, no allocation.
pub fn param_count(spec: &ModelSpec) -> usize {
    let mut total = 0;
    let mut width = spec.features;
    for &h in &spec.lstm_units {
        total += 4 * h * (width + h) + 4 * h;
        width = h;
    }
    if let Some(g) = spec.grid {
        total += g.filters * g.grid_size * g.kernel + g.filters;
        width += g.output_width();
    }
    if let Some(f) = spec.fusion_units {
        total += width * f + f;
        width = f;
    }
    total + width * spec.classes + spec.classes
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NnError::InvalidConfig(msg.to_string()));
        if self.features == 0 || self.timesteps == 0 {
            return bad("features and timesteps must be at least 1");
        }
        if self.lstm_units.is_empty() || self.lstm_units.contains(&0) {
            return bad("LSTM stack needs at least one non-empty layer");
        }
        if self.classes != NUM_CLASSES {
            return bad("output layer must have 7 classes");
        }
        match (self.architecture, self.grid, self.fusion_units) {
            (Architecture::Hybrid, Some(g), Some(f)) => {
                if g.grid_size < g.kernel || g.kernel == 0 || g.filters == 0 || g.pool == 0 || f == 0 {
                    return bad("invalid grid branch sizes");
                }
                if g.output_width() == 0 {
                    return bad("pooling leaves no convolution output");
                }
            }
            (Architecture::Hybrid, _, _) => return bad("hybrid model needs a grid branch and a fusion layer"),
            (_, None, None) => {}
            _ => return bad("LSTM models take no grid branch"),
        }
        Ok(())
    }

    pub fn lstm_output_width(&self) -> usize {
        *self.lstm_units.last().expect("validated stack")
    }

    pub fn seq_width(&self) -> usize {
        self.timesteps * self.features
    }

    /// Width of the vector entering the fusion (or output) dense layer.
    pub fn merged_width(&self) -> usize {
        self.lstm_output_width() + self.grid.map_or(0, |g| g.output_width())
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let branch = || "sequence".to_string();
        let mut layers = Vec::new();
        let n = self.lstm_units.len();
        for (idx, &units) in self.lstm_units.iter().enumerate() {
            layers.push(LayerSpec::Lstm {
                branch: branch(),
                units,
                return_sequences: idx + 1 < n,
                output_activation: self.lstm_output_activation,
            });
        }
        if let Some(g) = self.grid {
            let grid = || "grid".to_string();
            layers.push(LayerSpec::Conv1d {
                branch: grid(),
                filters: g.filters,
                kernel: g.kernel,
                activation: "relu".into(),
            });
            layers.push(LayerSpec::MaxPool1d { branch: grid(), pool: g.pool });
            layers.push(LayerSpec::Flatten {
                branch: grid(),
                width: g.output_width(),
            });
            layers.push(LayerSpec::Concatenate {
                width: self.merged_width(),
            });
        }
        if let Some(f) = self.fusion_units {
            layers.push(LayerSpec::Dense {
                units: f,
                activation: "relu".into(),
            });
        }
        layers.push(LayerSpec::Dense {
            units: self.classes,
            activation: "softmax".into(),
        });
        layers
    }

    pub fn describe(&self, seed: u64) -> ModelDescription {
        ModelDescription {
            architecture: self.architecture,
            seed,
            input: InputDescriptor {
                timesteps: self.timesteps,
                features: self.features,
                grid_size: self.grid.map(|g| g.grid_size),
            },
            layers: self.layers(),
            param_count: param_count(self),
        }
    }

    /// Same network, different label (and nothing else).
    pub fn same_network(&self, other: &ModelSpec) -> bool {
        ModelSpec {
            architecture: other.architecture,
            ..self.clone()
        } == *other
    }
}

/// Trainable parameters of a model; also used as the gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lstm: Vec<LstmParams>,
    pub conv: Option<Conv1dParams>,
    pub fusion: Option<DenseParams>,
    pub output: DenseParams,
}

impl ModelParams {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut width = spec.features;
        let mut lstm = Vec::new();
        for &h in &spec.lstm_units {
            lstm.push(LstmParams::zeros(width, h));
            width = h;
        }
        let conv = match spec.grid {
            Some(g) => Some(Conv1dParams::zeros(g.filters, g.grid_size, g.kernel)?),
            None => None,
        };
        let merged = spec.merged_width();
        let fusion = spec.fusion_units.map(|f| DenseParams::zeros(merged, f));
        let head_in = spec.fusion_units.unwrap_or(merged);
        Ok(ModelParams {
            lstm,
            conv,
            fusion,
            output: DenseParams::zeros(head_in, spec.classes),
        })
    }

    /// Glorot-uniform weights and zero biases, drawn in block order from one
    /// seeded stream.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seeded_rng(seed);
        let mut width = spec.features;
        let mut lstm = Vec::new();
        for &h in &spec.lstm_units {
            lstm.push(LstmParams::init(width, h, &mut rng));
            width = h;
        }
        let conv = match spec.grid {
            Some(g) => Some(Conv1dParams::init(g.filters, g.grid_size, g.kernel, &mut rng)?),
            None => None,
        };
        let merged = spec.merged_width();
        let fusion = spec.fusion_units.map(|f| DenseParams::init(merged, f, &mut rng));
        let head_in = spec.fusion_units.unwrap_or(merged);
        Ok(ModelParams {
            lstm,
            conv,
            fusion,
            output: DenseParams::init(head_in, spec.classes, &mut rng),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero_grad();
        z
    }

    /// `self += other`, block by block.
    pub fn add_assign(&mut self, other: &ModelParams) {
        for (dst, (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.blocks_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Replaces block values from a checkpoint, matching by name and shape.
    pub fn load_blocks(&mut self, blocks: &[(String, Tensor)]) -> Result<()> {
        let names: Vec<String> = self.blocks().into_iter().map(|(n, _)| n).collect();
        if names.len() != blocks.len() {
            return Err(NnError::Checkpoint(format!(
                "expected {} blocks, checkpoint has {}",
                names.len(),
                blocks.len()
            )));
        }
        for ((name, dst), (src_name, src)) in names.iter().zip(self.blocks_mut()).zip(blocks) {
            if name != src_name || dst.shape() != src.shape() {
                return Err(NnError::Checkpoint(format!("block {src_name} does not match {name}")));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}

impl ParamBlocks for ModelParams {
    fn blocks(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (idx, layer) in self.lstm.iter().enumerate() {
            out.extend(layer.blocks().into_iter().map(|(n, t)| (format!("lstm{idx}.{n}"), t)));
        }
        if let Some(conv) = &self.conv {
            out.extend(conv.blocks().into_iter().map(|(n, t)| (format!("conv.{n}"), t)));
        }
        if let Some(fusion) = &self.fusion {
            out.extend(fusion.blocks().into_iter().map(|(n, t)| (format!("fusion.{n}"), t)));
        }
        out.extend(self.output.blocks().into_iter().map(|(n, t)| (format!("output.{n}"), t)));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.lstm {
            out.extend(layer.blocks_mut());
        }
        if let Some(conv) = &mut self.conv {
            out.extend(conv.blocks_mut());
        }
        if let Some(fusion) = &mut self.fusion {
            out.extend(fusion.blocks_mut());
        }
        out.extend(self.output.blocks_mut());
        out
    }
}

/// Fresh parameters for `spec` drawn from `seed`.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ModelParams> {
    ModelParams::init(spec, seed)
}

/// One sample's inputs: a flattened `timesteps × features` sequence and, for
/// the hybrid model, a flattened `G × G` heatmap.
#[derive(Debug, Clone, Copy)]
pub struct SampleInput<'a> {
    pub seq: &'a [f64],
    pub grid: Option<&'a [f64]>,
}

/// Row-major batch storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub seq_width: usize,
    pub seq: Vec<f64>,
    pub grid_width: usize,
    pub grid: Option<Vec<f64>>,
}

impl Batch {
    pub fn new(seq_width: usize, grid_width: Option<usize>) -> Self {
        Batch {
            seq_width,
            seq: Vec::new(),
            grid_width: grid_width.unwrap_or(0),
            grid: grid_width.map(|_| Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.seq.len().checked_div(self.seq_width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.seq.clear();
        if let Some(g) = &mut self.grid {
            g.clear();
        }
    }

    pub fn push(&mut self, seq: &[f64], grid: Option<&[f64]>) {
        self.seq.extend_from_slice(seq);
        if let (Some(dst), Some(src)) = (&mut self.grid, grid) {
            dst.extend_from_slice(src);
        }
    }

    pub fn sample(&self, i: usize) -> SampleInput<'_> {
        SampleInput {
            seq: &self.seq[i * self.seq_width..(i + 1) * self.seq_width],
            grid: self
                .grid
                .as_ref()
                .map(|g| &g[i * self.grid_width..(i + 1) * self.grid_width]),
        }
    }
}

/// Intermediate values kept for the backward pass of one sample.
#[derive(Debug, Clone)]
pub struct SampleCache {
    lstm: Vec<LstmSequenceCache>,
    conv: Option<ConvCache>,
    merged: Vec<f64>,
    fusion_pre: Option<Vec<f64>>,
    head_input: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    input: Tensor,
    pre_activation: Tensor,
    pool: PoolCache,
}

/// Logits for one sample plus the cache for [`backward_sample`].
pub fn forward_sample(spec: &ModelSpec, params: &ModelParams, input: SampleInput<'_>) -> Result<(Vec<f64>, SampleCache)> {
    if input.seq.len() != spec.seq_width() {
        return Err(NnError::ShapeMismatch {
            context: "model sequence input",
            expected: vec![spec.timesteps, spec.features],
            found: vec![input.seq.len()],
        });
    }
    let mut x = Tensor::from_vec(&[spec.timesteps, spec.features], input.seq.to_vec())?;
    let mut lstm_caches = Vec::with_capacity(params.lstm.len());
    let last = params.lstm.len() - 1;
    for (idx, layer) in params.lstm.iter().enumerate() {
        let (out, cache) = lstm_sequence(&x, layer, idx < last, spec.lstm_output_activation)?;
        lstm_caches.push(cache);
        x = out;
    }
    let mut merged = x.into_data();

    let conv = match (spec.grid, &params.conv) {
        (Some(g), Some(conv_params)) => {
            let grid = input.grid.ok_or(NnError::ShapeMismatch {
                context: "model grid input",
                expected: vec![g.grid_size, g.grid_size],
                found: vec![],
            })?;
            let image = Tensor::from_vec(&[g.grid_size, g.grid_size], grid.to_vec()).map_err(|_| {
                NnError::ShapeMismatch {
                    context: "model grid input",
                    expected: vec![g.grid_size, g.grid_size],
                    found: vec![grid.len()],
                }
            })?;
            let pre = conv1d_forward(&image, conv_params)?;
            let activated = pre.map(|v| v.max(0.0));
            let (pooled, pool) = maxpool1d_forward(&activated, g.pool)?;
            merged.extend_from_slice(pooled.data());
            Some(ConvCache {
                input: image,
                pre_activation: pre,
                pool,
            })
        }
        _ => None,
    };

    let (head_input, fusion_pre) = match &params.fusion {
        Some(fusion) => {
            let pre = dense_forward(&merged, fusion)?;
            (pre.iter().map(|v| v.max(0.0)).collect(), Some(pre))
        }
        None => (merged.clone(), None),
    };
    let logits = dense_forward(&head_input, &params.output)?;
    Ok((
        logits,
        SampleCache {
            lstm: lstm_caches,
            conv,
            merged,
            fusion_pre,
            head_input,
        },
    ))
}

/// Backpropagates logit gradients for one sample, adding into `grads`.
pub fn backward_sample(
    spec: &ModelSpec,
    params: &ModelParams,
    cache: &SampleCache,
    dlogits: &[f64],
    grads: &mut ModelParams,
) -> Result<()> {
    let dhead = dense_backward(&cache.head_input, &params.output, dlogits, &mut grads.output)?;
    let dmerged = match (&params.fusion, &cache.fusion_pre, &mut grads.fusion) {
        (Some(fusion), Some(pre), Some(gf)) => {
            let dpre: Vec<f64> = dhead
                .iter()
                .zip(pre)
                .map(|(d, &p)| if p > 0.0 { *d } else { 0.0 })
                .collect();
            dense_backward(&cache.merged, fusion, &dpre, gf)?
        }
        _ => dhead,
    };

    let lstm_width = spec.lstm_output_width();
    if let (Some(cc), Some(conv), Some(gc)) = (&cache.conv, &params.conv, &mut grads.conv) {
        let pooled_shape = [cc.pool.argmax.len() / conv.filters(), conv.filters()];
        let dpooled = Tensor::from_vec(&pooled_shape, dmerged[lstm_width..].to_vec())?;
        let dact = maxpool1d_backward(&cc.pool, &dpooled)?;
        let mut dpre = dact;
        for (d, &p) in dpre.data_mut().iter_mut().zip(cc.pre_activation.data()) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        conv1d_backward(&cc.input, conv, &dpre, gc)?;
    }

    let last = params.lstm.len() - 1;
    let mut upstream = Tensor::vector(dmerged[..lstm_width].to_vec());
    for idx in (0..=last).rev() {
        let dx = lstm_backward_into(&params.lstm[idx], &cache.lstm[idx], &upstream, &mut grads.lstm[idx])?;
        upstream = dx;
    }
    Ok(())
}

/// Class probabilities for every sample in the batch.
pub fn model_forward(spec: &ModelSpec, params: &ModelParams, batch: &Batch) -> Result<Vec<Vec<f64>>> {
    (0..batch.len())
        .map(|i| {
            let (logits, _) = forward_sample(spec, params, batch.sample(i))?;
            softmax(&logits)
        })
        .collect()
}

/// Summed loss and correct-prediction count over a batch, with gradients of
/// the summed loss added into `grads` in sample order.
pub fn accumulate_gradients(
    spec: &ModelSpec,
    params: &ModelParams,
    batch: &Batch,
    labels: &[usize],
    grads: &mut ModelParams,
) -> Result<(f64, usize)> {
    if labels.len() != batch.len() {
        return Err(NnError::ShapeMismatch {
            context: "batch labels",
            expected: vec![batch.len()],
            found: vec![labels.len()],
        });
    }
    let mut target = vec![0.0; spec.classes];
    let mut loss = 0.0;
    let mut correct = 0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= spec.classes {
            return Err(NnError::InvalidTarget);
        }
        let (logits, cache) = forward_sample(spec, params, batch.sample(i))?;
        target.iter_mut().for_each(|t| *t = 0.0);
        target[label] = 1.0;
        let ce = softmax_cross_entropy(&logits, &target)?;
        loss += ce.loss;
        if argmax(&ce.probs) == label {
            correct += 1;
        }
        backward_sample(spec, params, &cache, &ce.grad, grads)?;
    }
    Ok((loss, correct))
}

/// Mean cross-entropy over the batch and its gradient.
pub fn model_backward(
    spec: &ModelSpec,
    params: &ModelParams,
    batch: &Batch,
    labels: &[usize],
) -> Result<(f64, ModelParams)> {
    let mut grads = params.zeros_like();
    let (loss, _) = accumulate_gradients(spec, params, batch, labels, &mut grads)?;
    let n = batch.len().max(1) as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
