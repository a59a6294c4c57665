//! Classification and regression metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::argmax;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no samples to score")]
    Empty,
    #[error("label {label} out of range for {classes} classes")]
    OutOfRange { label: usize, classes: usize },
    #[error("confusion matrix has no entries")]
    EmptyMatrix,
    #[error("class {0} has no positives or no negatives")]
    DegenerateClass(usize),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(MetricsError::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / pred.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["true\\pred".to_string()];
        header.extend((0..self.classes).map(|k| k.to_string()));
        out.write_record(&header)?;
        for (k, row) in self.counts.iter().enumerate() {
            let mut rec = vec![k.to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn confusion(pred: &[usize], truth: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        for label in [p, t] {
            if label >= classes {
                return Err(MetricsError::OutOfRange { label, classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Support-weighted mean of per-class F1.
///
/// Precision, recall and F1 are taken as 0 wherever their denominator is 0.
pub fn weighted_f1(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut score = 0.0;
    for k in 0..cm.classes {
        let tp = cm.counts[k][k] as f64;
        let support = cm.row_sum(k);
        let predicted = cm.col_sum(k);
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { tp / support as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        score += f1 * support as f64 / total as f64;
    }
    Ok(score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub mse: f64,
}

pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(pred.len(), truth.len())?;
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let d = p - t;
        se += d * d;
        ae += d.abs();
    }
    let mse = se / n;
    Ok(RegressionMetrics {
        rmse: mse.sqrt(),
        mae: ae / n,
        mse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["fpr", "tpr"])?;
        for (fpr, tpr) in &self.points {
            out.write_record([fpr.to_string(), tpr.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// ROC of a binary problem by sweeping every distinct score as a threshold.
///
/// Tied scores move the curve diagonally, so the trapezoidal area gives ties
/// half credit.
pub fn binary_roc(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    check_lengths(scores.len(), positive.len())?;
    let pos_total = positive.iter().filter(|&&p| p).count();
    let neg_total = positive.len() - pos_total;
    if pos_total == 0 || neg_total == 0 {
        return Err(MetricsError::DegenerateClass(0));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (pos_total as f64, neg_total as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == threshold {
            if positive[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        let (prev_fpr, prev_tpr) = *points.last().expect("starts at origin");
        let point = (fp as f64 / n, tp as f64 / p);
        auc += (point.0 - prev_fpr) * (point.1 + prev_tpr) / 2.0;
        points.push(point);
    }
    Ok(RocCurve { points, auc })
}

/// One-vs-rest ROC for `class`, scored by that class's probability.
pub fn roc_auc(probs: &[Vec<f64>], truth: &[usize], class: usize) -> Result<RocCurve> {
    check_lengths(probs.len(), truth.len())?;
    let classes = probs[0].len();
    if class >= classes {
        return Err(MetricsError::OutOfRange { label: class, classes });
    }
    let scores: Vec<f64> = probs.iter().map(|row| row[class]).collect();
    let positive: Vec<bool> = truth.iter().map(|&t| t == class).collect();
    binary_roc(&scores, &positive).map_err(|e| match e {
        MetricsError::DegenerateClass(_) => MetricsError::DegenerateClass(class),
        other => other,
    })
}

/// Pools every `(sample, class)` decision into one binary problem.
pub fn micro_average_roc(probs: &[Vec<f64>], truth: &[usize]) -> Result<RocCurve> {
    check_lengths(probs.len(), truth.len())?;
    let mut scores = Vec::with_capacity(probs.len() * probs[0].len());
    let mut positive = Vec::with_capacity(scores.capacity());
    for (row, &t) in probs.iter().zip(truth) {
        for (c, &s) in row.iter().enumerate() {
            scores.push(s);
            positive.push(c == t);
        }
    }
    binary_roc(&scores, &positive)
}

/// What the regression errors are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionBasis {
    /// Predicted vs true class codes as real numbers.
    #[default]
    ClassCodes,
    /// Per-class probabilities vs the one-hot target.
    Probabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub samples: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub confusion: ConfusionMatrix,
    pub regression_basis: RegressionBasis,
    pub rmse: f64,
    pub mae: f64,
    pub mse: f64,
    /// `None` for classes absent from (or covering all of) the scored set.
    pub per_class_auc: Vec<Option<f64>>,
    pub micro_auc: Option<f64>,
}

/// Scores probability rows against true labels.
pub fn evaluate(probs: &[Vec<f64>], truth: &[usize], basis: RegressionBasis) -> Result<MetricsBundle> {
    check_lengths(probs.len(), truth.len())?;
    let classes = probs[0].len();
    let pred: Vec<usize> = probs.iter().map(|row| argmax(row)).collect();
    let cm = confusion(&pred, truth, classes)?;
    let reg = match basis {
        RegressionBasis::ClassCodes => {
            let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
            let t: Vec<f64> = truth.iter().map(|&v| v as f64).collect();
            regression_metrics(&p, &t)?
        }
        RegressionBasis::Probabilities => {
            let p: Vec<f64> = probs.iter().flatten().copied().collect();
            let t: Vec<f64> = truth
                .iter()
                .flat_map(|&y| (0..classes).map(move |c| if c == y { 1.0 } else { 0.0 }))
                .collect();
            regression_metrics(&p, &t)?
        }
    };
    let per_class_auc = (0..classes).map(|c| roc_auc(probs, truth, c).ok().map(|r| r.auc)).collect();
    Ok(MetricsBundle {
        samples: probs.len(),
        accuracy: accuracy(&pred, truth)?,
        weighted_f1: weighted_f1(&cm)?,
        confusion: cm,
        regression_basis: basis,
        rmse: reg.rmse,
        mae: reg.mae,
        mse: reg.mse,
        per_class_auc,
        micro_auc: micro_average_roc(probs, truth).ok().map(|r| r.auc),
    })
}
