use rand::seq::SliceRandom;

use super::{Result, TrainError};
use crate::nn::seeded_rng;

/// Seeded shuffle of `0..n` split into `(train, test)` index lists.
///
/// The test side gets `round(n · fraction)` indices, kept within `[1, n − 1]`
/// so neither side is empty.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(TrainError::TooFewSamples(n));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(TrainError::InvalidConfig(format!("split fraction {test_fraction} not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let test_len = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let test = order.split_off(n - test_len);
    Ok((order, test))
}

/// Partitioned features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit<T> {
    pub x_train: Vec<T>,
    pub x_test: Vec<T>,
    pub y_train: Vec<usize>,
    pub y_test: Vec<usize>,
}

pub fn train_test_split<T: Clone>(x: &[T], y: &[usize], test_fraction: f64, seed: u64) -> Result<TrainTestSplit<T>> {
    if x.len() != y.len() {
        return Err(TrainError::LengthMismatch(x.len(), y.len()));
    }
    let (train, test) = split_indices(x.len(), test_fraction, seed)?;
    let pick_x = |idx: &[usize]| idx.iter().map(|&i| x[i].clone()).collect();
    let pick_y = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect();
    Ok(TrainTestSplit {
        x_train: pick_x(&train),
        x_test: pick_x(&test),
        y_train: pick_y(&train),
        y_test: pick_y(&test),
    })
}
