//! Splitting, scaling, class balancing, Adam and the timed training loop.

mod adam;
mod bench;
mod oversample;
mod scale;
mod split;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use bench::{benchmark_pipelines, BenchmarkReport, BenchmarkRun};
pub use oversample::{one_hot, oversample_positions, random_oversample};
pub use scale::{ScalerAccumulator, StandardScaler};
pub use split::{split_indices, train_test_split, TrainTestSplit};
pub use train::{
    derive_seed, evaluate_indices, make_splits, predict_proba, train_model, EpochStats, Splits, Timing, TrainConfig,
    TrainOutcome, TrainReport,
};

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::nn::NnError;
use crate::vectorizer::VectorizeError;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("shape mismatch in parameter block {block}")]
    ShapeMismatch { block: usize },
    #[error("scaler used before fit")]
    NotFitted,
    #[error("class code {code} out of range for {classes} classes")]
    OutOfRange { code: usize, classes: usize },
    #[error("no samples to balance")]
    EmptyClassSet,
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Numeric {
        epoch: usize,
        batch: usize,
        #[source]
        source: NnError,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
