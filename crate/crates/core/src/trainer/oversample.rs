use rand::Rng;

use super::{Result, TrainError};
use crate::nn::seeded_rng;

/// One-hot encoding of a class code.
pub fn one_hot(code: usize, classes: usize) -> Result<Vec<f64>> {
    if code >= classes {
        return Err(TrainError::OutOfRange { code, classes });
    }
    let mut v = vec![0.0; classes];
    v[code] = 1.0;
    Ok(v)
}

/// Positions to duplicate so every present class reaches the majority count.
///
/// Duplicates are drawn with replacement from each minority class, in class
/// order, and appended after the originals.
pub fn oversample_positions(y: &[usize], seed: u64) -> Result<Vec<usize>> {
    if y.is_empty() {
        return Err(TrainError::EmptyClassSet);
    }
    let classes = y.iter().copied().max().expect("non-empty") + 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (pos, &label) in y.iter().enumerate() {
        members[label].push(pos);
    }
    let majority = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = seeded_rng(seed);
    let mut extra = Vec::new();
    for group in members.iter().filter(|g| !g.is_empty()) {
        for _ in group.len()..majority {
            extra.push(group[rng.gen_range(0..group.len())]);
        }
    }
    Ok(extra)
}

/// Returns the originals followed by duplicated minority samples.
pub fn random_oversample<T: Clone>(x: &[T], y: &[usize], seed: u64) -> Result<(Vec<T>, Vec<usize>)> {
    if x.len() != y.len() {
        return Err(TrainError::LengthMismatch(x.len(), y.len()));
    }
    let extra = oversample_positions(y, seed)?;
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    for pos in extra {
        xs.push(x[pos].clone());
        ys.push(y[pos]);
    }
    Ok((xs, ys))
}
