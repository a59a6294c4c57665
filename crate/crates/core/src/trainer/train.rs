use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, oversample_positions, split_indices, AdamConfig, AdamState, Result, ScalerAccumulator,
    StandardScaler, TrainError,
};
use crate::features::FeatureSource;
use crate::metrics::{self, MetricsBundle, RegressionBasis};
use crate::models::{accumulate_gradients, model_forward, Batch, ModelParams, ModelSpec};
use crate::nn::{seeded_rng, ParamBlocks};

const INITIAL_LOSS_SAMPLES: usize = 2048;
const FEATURE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub test_fraction: f64,
    /// Share of the training split held out for validation.
    pub validation_fraction: f64,
    /// Balance the training split by random oversampling.
    pub oversample: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 20,
            batch_size: 512,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            test_fraction: 0.2,
            validation_fraction: 0.1,
            oversample: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fraction_ok = |f: f64| f > 0.0 && f < 1.0;
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !fraction_ok(self.test_fraction) || !fraction_ok(self.validation_fraction) {
            return Err(TrainError::InvalidConfig("split fractions must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
        {
            return Err(TrainError::InvalidConfig("bad Adam hyperparameters".into()));
        }
        Ok(())
    }
}

/// Independent seed for one named use of the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const STREAM_TEST_SPLIT: u64 = 1;
const STREAM_VALIDATION_SPLIT: u64 = 2;
const STREAM_OVERSAMPLE: u64 = 3;
const STREAM_INIT: u64 = 4;
const STREAM_BATCHES: u64 = 5;

/// Sample indices for each role. `train` already contains the oversampled
/// duplicates, appended after the originals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Training samples before oversampling.
    pub train_original: usize,
}

/// Test split, then validation split out of the rest, then oversampling of
/// what remains for training.
pub fn make_splits(labels: &[usize], cfg: &TrainConfig) -> Result<Splits> {
    cfg.validate()?;
    let (rest, test) = split_indices(labels.len(), cfg.test_fraction, derive_seed(cfg.seed, STREAM_TEST_SPLIT))?;
    let (train_pos, val_pos) =
        split_indices(rest.len(), cfg.validation_fraction, derive_seed(cfg.seed, STREAM_VALIDATION_SPLIT))?;
    let mut train: Vec<usize> = train_pos.iter().map(|&p| rest[p]).collect();
    let validation = val_pos.iter().map(|&p| rest[p]).collect();
    let train_original = train.len();
    if cfg.oversample {
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let extra = oversample_positions(&y, derive_seed(cfg.seed, STREAM_OVERSAMPLE))?;
        let duplicates: Vec<usize> = extra.into_iter().map(|p| train[p]).collect();
        train.extend(duplicates);
    }
    Ok(Splits {
        train,
        validation,
        test,
        train_original,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Wall-clock measurements, kept apart from everything deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub vectorization_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_samples: usize,
    pub train_samples_oversampled: usize,
    pub validation_samples: usize,
    pub test_samples: usize,
    /// Mean loss of the freshly initialized model on up to 2048 training samples.
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub validation_accuracy: f64,
    pub timing: Timing,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub scaler: StandardScaler,
    pub report: TrainReport,
}

fn fit_scaler(source: &dyn FeatureSource, indices: &[usize]) -> Result<StandardScaler> {
    let mut acc = ScalerAccumulator::new(source.layout().row_width());
    let mut rows = Vec::new();
    for chunk in indices.chunks(FEATURE_CHUNK) {
        rows.clear();
        source.fill_rows(chunk, &mut rows)?;
        acc.update(&rows);
    }
    acc.finish()
}

/// Fetches, scales and splits feature rows into a model batch.
fn load_batch(
    source: &dyn FeatureSource,
    scaler: &StandardScaler,
    indices: &[usize],
    rows: &mut Vec<f64>,
    batch: &mut Batch,
) -> Result<()> {
    let layout = source.layout();
    rows.clear();
    source.fill_rows(indices, rows)?;
    scaler.transform(rows)?;
    batch.clear();
    for row in rows.chunks_exact(layout.row_width()) {
        let (meta, grid) = row.split_at(layout.meta_width);
        batch.push(meta, layout.grid_size.map(|_| grid));
    }
    Ok(())
}

fn check_inputs(spec: &ModelSpec, source: &dyn FeatureSource, labels: &[usize]) -> Result<()> {
    spec.validate()?;
    let layout = source.layout();
    if source.len() != labels.len() {
        return Err(TrainError::LengthMismatch(source.len(), labels.len()));
    }
    if layout.meta_width != spec.seq_width() {
        return Err(TrainError::InvalidConfig(format!(
            "model expects {} sequence values per sample, features provide {}",
            spec.seq_width(),
            layout.meta_width
        )));
    }
    if layout.grid_size != spec.grid.map(|g| g.grid_size) {
        return Err(TrainError::InvalidConfig("feature grid does not match the model's grid branch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= spec.classes) {
        return Err(TrainError::OutOfRange {
            code: bad,
            classes: spec.classes,
        });
    }
    Ok(())
}

/// Softmax probabilities for the given samples.
pub fn predict_proba(
    spec: &ModelSpec,
    params: &ModelParams,
    scaler: &StandardScaler,
    source: &dyn FeatureSource,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let layout = source.layout();
    let mut batch = Batch::new(layout.meta_width, layout.grid_size.map(|_| layout.grid_width()));
    let mut rows = Vec::new();
    let mut probs = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(FEATURE_CHUNK) {
        load_batch(source, scaler, chunk, &mut rows, &mut batch)?;
        probs.extend(model_forward(spec, params, &batch)?);
    }
    Ok(probs)
}

/// Full metrics for the given samples.
pub fn evaluate_indices(
    spec: &ModelSpec,
    outcome: &TrainOutcome,
    source: &dyn FeatureSource,
    labels: &[usize],
    indices: &[usize],
    basis: RegressionBasis,
) -> Result<MetricsBundle> {
    let probs = predict_proba(spec, &outcome.params, &outcome.scaler, source, indices)?;
    let truth: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    Ok(metrics::evaluate(&probs, &truth, basis)?)
}

fn mean_loss(probs: &[Vec<f64>], truth: &[usize]) -> f64 {
    let total: f64 = probs.iter().zip(truth).map(|(p, &y)| -p[y].max(f64::MIN_POSITIVE).ln()).sum();
    total / probs.len().max(1) as f64
}

/// Mini-batch Adam on softmax cross-entropy.
///
/// Batch order is reshuffled every epoch from the run seed. Only the epoch
/// loop is timed.
pub fn train_model(
    spec: &ModelSpec,
    source: &dyn FeatureSource,
    labels: &[usize],
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_inputs(spec, source, labels)?;
    if splits.train.is_empty() || splits.validation.is_empty() {
        return Err(TrainError::TooFewSamples(splits.train.len().min(splits.validation.len())));
    }
    let scaler = fit_scaler(source, &splits.train)?;
    let mut params = ModelParams::init(spec, derive_seed(cfg.seed, STREAM_INIT))?;

    let probe = &splits.train[..splits.train.len().min(INITIAL_LOSS_SAMPLES)];
    let probe_truth: Vec<usize> = probe.iter().map(|&i| labels[i]).collect();
    let initial_loss = mean_loss(&predict_proba(spec, &params, &scaler, source, probe)?, &probe_truth);

    let layout = source.layout();
    let mut batch = Batch::new(layout.meta_width, layout.grid_size.map(|_| layout.grid_width()));
    let mut rows = Vec::new();
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    let mut grads = params.zeros_like();
    let mut adam = AdamState::new(&params);
    let adam_cfg = cfg.adam();
    let mut order = splits.train.clone();
    let mut shuffler = seeded_rng(derive_seed(cfg.seed, STREAM_BATCHES));
    let mut epochs = Vec::with_capacity(cfg.epochs);

    let started = Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffler);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            load_batch(source, &scaler, chunk, &mut rows, &mut batch)?;
            batch_labels.clear();
            batch_labels.extend(chunk.iter().map(|&i| labels[i]));
            grads.zero_grad();
            let (loss, hits) = accumulate_gradients(spec, &params, &batch, &batch_labels, &mut grads)
                .map_err(|source| TrainError::Numeric {
                    epoch,
                    batch: b,
                    source,
                })?;
            if !loss.is_finite() {
                return Err(TrainError::Numeric {
                    epoch,
                    batch: b,
                    source: crate::nn::NnError::NonFinite("training loss"),
                });
            }
            grads.scale(1.0 / chunk.len() as f64);
            adam_step(&mut params, &grads, &mut adam, &adam_cfg)?;
            loss_sum += loss;
            correct += hits;
        }
        epochs.push(EpochStats {
            epoch,
            loss: loss_sum / order.len() as f64,
            accuracy: correct as f64 / order.len() as f64,
        });
    }
    let train_seconds = started.elapsed().as_secs_f64();

    let val_probs = predict_proba(spec, &params, &scaler, source, &splits.validation)?;
    let val_truth: Vec<usize> = splits.validation.iter().map(|&i| labels[i]).collect();
    let val_pred: Vec<usize> = val_probs.iter().map(|p| crate::models::argmax(p)).collect();
    let validation_accuracy = metrics::accuracy(&val_pred, &val_truth)?;

    Ok(TrainOutcome {
        params,
        scaler,
        report: TrainReport {
            config: cfg.clone(),
            train_samples: splits.train_original,
            train_samples_oversampled: splits.train.len(),
            validation_samples: splits.validation.len(),
            test_samples: splits.test.len(),
            initial_loss,
            epochs,
            validation_accuracy,
            timing: Timing {
                train_seconds,
                vectorization_seconds: None,
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureLayout, VectorizedFeatures};
    use crate::models::{build_lstm_stack, NUM_CLASSES};

    /// Two scalar features per sample held directly in `meta`.
    fn blobs(n: usize, classes: usize, seed: u64) -> (VectorizedFeatures, Vec<usize>) {
        use rand::Rng;
        let mut rng = seeded_rng(seed);
        let mut meta = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            let angle = c as f64 * std::f64::consts::TAU / classes as f64;
            meta.push(3.0 * angle.cos() + rng.gen_range(-0.5..0.5));
            meta.push(3.0 * angle.sin() + rng.gen_range(-0.5..0.5));
            labels.push(c);
        }
        let features = VectorizedFeatures {
            layout: FeatureLayout {
                meta_width: 2,
                grid_size: None,
            },
            meta,
            segment_grids: Vec::new(),
            sample_segment: vec![0; n],
        };
        (features, labels)
    }

    fn small_spec() -> ModelSpec {
        let mut spec = build_lstm_stack(2);
        spec.lstm_units = vec![8, 4];
        spec
    }

    #[test]
    fn splits_cover_everything_once() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 10 == 0)).collect();
        let cfg = TrainConfig::default();
        let s = make_splits(&labels, &cfg).unwrap();
        assert_eq!(s.test.len(), 20);
        assert_eq!(s.validation.len(), 8);
        assert_eq!(s.train_original, 72);
        let mut seen: Vec<usize> = s.train[..s.train_original].iter().chain(&s.validation).chain(&s.test).copied().collect();
        seen.sort();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
        let y: Vec<usize> = s.train.iter().map(|&i| labels[i]).collect();
        assert_eq!(y.iter().filter(|&&c| c == 0).count(), y.iter().filter(|&&c| c == 1).count());
        assert_eq!(make_splits(&labels, &cfg).unwrap(), s);
    }

    #[test]
    fn separable_three_class_set() {
        let (features, labels) = blobs(300, 3, 11);
        let cfg = TrainConfig {
            batch_size: 16,
            learning_rate: 0.01,
            seed: 5,
            ..TrainConfig::default()
        };
        let splits = make_splits(&labels, &cfg).unwrap();
        let out = train_model(&small_spec(), &features, &labels, &splits, &cfg).unwrap();
        let r = &out.report;
        assert_eq!(r.epochs.len(), 20);
        assert!(r.epochs.last().unwrap().accuracy >= 0.95, "{:?}", r.epochs.last());
        assert!(r.epochs.last().unwrap().loss < r.epochs[0].loss);
        assert!(r.timing.train_seconds >= 0.0);
    }

    #[test]
    fn repeatable() {
        let (features, labels) = blobs(120, 3, 2);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 32,
            seed: 9,
            ..TrainConfig::default()
        };
        let splits = make_splits(&labels, &cfg).unwrap();
        let a = train_model(&small_spec(), &features, &labels, &splits, &cfg).unwrap();
        let b = train_model(&small_spec(), &features, &labels, &splits, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.report.epochs, b.report.epochs);
    }

    #[test]
    fn fresh_model_loss_near_uniform() {
        let (features, labels) = blobs(700, NUM_CLASSES, 3);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let splits = make_splits(&labels, &cfg).unwrap();
        let out = train_model(&build_lstm_stack(2), &features, &labels, &splits, &cfg).unwrap();
        assert!((out.report.initial_loss - 7f64.ln()).abs() < 0.1, "{}", out.report.initial_loss);
    }

    #[test]
    fn rejects_mismatched_features() {
        let (features, labels) = blobs(50, 3, 1);
        let cfg = TrainConfig::default();
        let splits = make_splits(&labels, &cfg).unwrap();
        let err = train_model(&build_lstm_stack(1), &features, &labels, &splits, &cfg).unwrap_err();
        assert!(matches!(err, TrainError::InvalidConfig(_)));
        let bad = TrainConfig {
            epochs: 0,
            ..cfg
        };
        assert!(make_splits(&labels, &bad).is_err());
    }
}
