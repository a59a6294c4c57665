use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{make_splits, train_model, Result, Splits, TrainConfig, TrainOutcome};
use crate::features::{FeatureLayout, OnTheFlyFeatures, SegmentIndex, VectorizedFeatures};
use crate::ingest::Dataset;
use crate::models::ModelSpec;
use crate::vectorizer::VectorizationConfig;

/// Training times with and without precomputed features, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub t_novec: f64,
    pub t_vec: f64,
    /// One-time cost of the vectorized path, not included in `t_vec`.
    pub t_vectorization: f64,
    /// `100 · (t_novec − t_vec) / t_novec`
    pub reduction_pct: f64,
}

impl BenchmarkReport {
    pub fn new(t_novec: f64, t_vec: f64, t_vectorization: f64) -> Self {
        let reduction_pct = if t_novec > 0.0 {
            100.0 * (t_novec - t_vec) / t_novec
        } else {
            0.0
        };
        BenchmarkReport {
            t_novec,
            t_vec,
            t_vectorization,
            reduction_pct,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub novec: TrainOutcome,
    pub vec: TrainOutcome,
    pub features: VectorizedFeatures,
    pub splits: Splits,
}

/// Trains the same model twice on the same splits: once recomputing
/// features for every batch, once from features vectorized up front.
///
/// The runs are serial. Since both paths see identical features, the trained
/// parameters match exactly and only the clock differs.
pub fn benchmark_pipelines(
    dataset: &Dataset,
    index: &SegmentIndex,
    spec: &ModelSpec,
    vectorization: &VectorizationConfig,
    cfg: &TrainConfig,
) -> Result<BenchmarkRun> {
    let layout = FeatureLayout {
        meta_width: spec.seq_width(),
        grid_size: spec.grid.map(|g| g.grid_size),
    };
    let labels = dataset.labels();
    let splits = make_splits(&labels, cfg)?;

    let live = OnTheFlyFeatures {
        dataset,
        index,
        layout,
        config: vectorization.clone(),
    };
    let novec = train_model(spec, &live, &labels, &splits, cfg)?;

    let started = Instant::now();
    let features = VectorizedFeatures::compute(dataset, index, layout, vectorization)?;
    let t_vectorization = started.elapsed().as_secs_f64();
    let mut vec = train_model(spec, &features, &labels, &splits, cfg)?;
    vec.report.timing.vectorization_seconds = Some(t_vectorization);

    Ok(BenchmarkRun {
        report: BenchmarkReport::new(novec.report.timing.train_seconds, vec.report.timing.train_seconds, t_vectorization),
        novec,
        vec,
        features,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{segment_dataset, SegmentConfig};
    use crate::ingest::{dataset_from_samples, ActivityLabel, LabeledSample};
    use crate::models::build_veclstm;

    #[test]
    fn reduction_formula() {
        let r = BenchmarkReport::new(1045.76, 772.0, 10.0);
        assert!((r.reduction_pct - 26.178).abs() < 1e-3);
        assert_eq!(BenchmarkReport::new(0.0, 0.0, 0.0).reduction_pct, 0.0);
    }

    #[test]
    fn both_paths_learn_the_same_parameters() {
        let samples: Vec<LabeledSample> = (0..200)
            .map(|i| LabeledSample {
                time: i as i64 * 5,
                lat: 39.9 + (i % 13) as f64 * 0.001,
                lon: 116.3 + (i % 7) as f64 * 0.001,
                alt: None,
                label: ActivityLabel::ALL[(i / 40) % 3],
                user: format!("{:03}", i / 100),
                metadata: 0.0,
            })
            .collect();
        let ds = dataset_from_samples(samples, &VectorizationConfig::default()).unwrap();
        let index = segment_dataset(&ds, &SegmentConfig::default());
        let mut spec = build_veclstm(1);
        spec.lstm_units = vec![6, 4];
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let run = benchmark_pipelines(&ds, &index, &spec, &VectorizationConfig::default(), &cfg).unwrap();
        assert_eq!(run.novec.params, run.vec.params);
        assert_eq!(run.novec.report.epochs, run.vec.report.epochs);
        assert!(run.report.t_novec >= 0.0 && run.report.t_vec >= 0.0 && run.report.t_vectorization >= 0.0);
        assert_eq!(run.vec.report.timing.vectorization_seconds, Some(run.report.t_vectorization));
    }
}
