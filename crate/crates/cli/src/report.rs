use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use veclstm::ingest::ActivityLabel;
use veclstm::metrics::{micro_average_roc, roc_auc, MetricsBundle};

pub const BENCH_CSV_HEADER: [&str; 9] = [
    "variant",
    "train_seconds",
    "vectorize_seconds",
    "val_acc",
    "test_acc",
    "weighted_f1",
    "rmse",
    "mae",
    "mse",
];

/// One line of the Table-I-style benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    pub train_seconds: f64,
    pub vectorize_seconds: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub weighted_f1: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mse: f64,
}

pub(crate) fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    // serialize() derives the header from the field names
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bench_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == BENCH_CSV_HEADER, "unexpected bench header {header:?}");
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Writes `confusion.csv`, one ROC CSV per class with a defined curve, and
/// `roc_micro.csv`.
pub(crate) fn write_metrics_files(
    dir: &Path,
    bundle: &MetricsBundle,
    probs: &[Vec<f64>],
    truth: &[usize],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let confusion = dir.join("confusion.csv");
    bundle.confusion.write_csv(File::create(&confusion)?)?;
    written.push(confusion);
    for label in ActivityLabel::ALL {
        if let Ok(curve) = roc_auc(probs, truth, label.code() as usize) {
            let path = dir.join(format!("roc_{}.csv", label.name()));
            curve.write_csv(File::create(&path)?)?;
            written.push(path);
        }
    }
    if let Ok(curve) = micro_average_roc(probs, truth) {
        let path = dir.join("roc_micro.csv");
        curve.write_csv(File::create(&path)?)?;
        written.push(path);
    }
    Ok(written)
}
