use serde::{Deserialize, Serialize};

use super::{Result, TrainError};

const MIN_STD: f64 = 1e-12;

/// Per-column `(x − μ) / σ` with the population standard deviation.
///
/// Columns whose σ falls below `1e-12` map to 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StandardScaler {
    pub width: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    fitted: bool,
}

/// Streaming (Welford) moments, so rows can arrive in batches.
#[derive(Debug, Clone)]
pub struct ScalerAccumulator {
    width: usize,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ScalerAccumulator {
    pub fn new(width: usize) -> Self {
        ScalerAccumulator {
            width,
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    /// Adds row-major rows of `width` columns.
    pub fn update(&mut self, rows: &[f64]) {
        for row in rows.chunks_exact(self.width) {
            self.count += 1;
            let n = self.count as f64;
            for ((x, mean), m2) in row.iter().zip(&mut self.mean).zip(&mut self.m2) {
                let delta = x - *mean;
                *mean += delta / n;
                *m2 += delta * (x - *mean);
            }
        }
    }

    pub fn finish(self) -> Result<StandardScaler> {
        if self.count == 0 {
            return Err(TrainError::TooFewSamples(0));
        }
        let n = self.count as f64;
        Ok(StandardScaler {
            width: self.width,
            std: self.m2.iter().map(|m2| (m2 / n).sqrt()).collect(),
            mean: self.mean,
            fitted: true,
        })
    }
}

impl StandardScaler {
    pub fn fit(rows: &[f64], width: usize) -> Result<Self> {
        if width == 0 || !rows.len().is_multiple_of(width) {
            return Err(TrainError::InvalidConfig(format!(
                "{} values do not form rows of width {width}",
                rows.len()
            )));
        }
        let mut acc = ScalerAccumulator::new(width);
        acc.update(rows);
        acc.finish()
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn transform(&self, rows: &mut [f64]) -> Result<()> {
        if !self.fitted {
            return Err(TrainError::NotFitted);
        }
        if !rows.len().is_multiple_of(self.width) {
            return Err(TrainError::LengthMismatch(rows.len(), self.width));
        }
        for row in rows.chunks_exact_mut(self.width) {
            for ((x, mean), std) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = if *std < MIN_STD { 0.0 } else { (*x - mean) / std };
            }
        }
        Ok(())
    }
}
