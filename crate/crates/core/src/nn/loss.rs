use super::{ensure_finite, NnError, Result};

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    ensure_finite("softmax input", logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub probs: Vec<f64>,
    pub loss: f64,
    /// `probs − target`
    pub grad: Vec<f64>,
}

/// Softmax followed by cross-entropy against a one-hot target.
pub fn softmax_cross_entropy(logits: &[f64], target: &[f64]) -> Result<CrossEntropy> {
    if target.len() != logits.len() || !is_one_hot(target) {
        return Err(NnError::InvalidTarget);
    }
    let probs = softmax(logits)?;
    let class = target.iter().position(|&t| t == 1.0).expect("validated one-hot");
    // log p_c computed from the shifted logits to avoid log(0) underflow.
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = -((logits[class] - max) - log_sum);
    if !loss.is_finite() {
        return Err(NnError::NonFinite("cross-entropy"));
    }
    let grad = probs.iter().zip(target).map(|(p, t)| p - t).collect();
    Ok(CrossEntropy { probs, loss, grad })
}

fn is_one_hot(target: &[f64]) -> bool {
    target.iter().filter(|&&t| t == 1.0).count() == 1 && target.iter().all(|&t| t == 0.0 || t == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_seven_classes() {
        let mut target = vec![0.0; 7];
        target[3] = 1.0;
        let ce = softmax_cross_entropy(&[0.25; 7], &target).unwrap();
        for p in &ce.probs {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
        assert!((ce.loss - 7f64.ln()).abs() < 1e-12);
        assert!((ce.loss - 1.94591).abs() < 1e-5);
    }

    #[test]
    fn analytic_two_class() {
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_is_probs_minus_target() {
        let logits = [0.3, -1.2, 2.0, 0.0];
        let target = [0.0, 0.0, 1.0, 0.0];
        let ce = softmax_cross_entropy(&logits, &target).unwrap();
        for ((g, p), t) in ce.grad.iter().zip(&ce.probs).zip(target) {
            assert_eq!(*g, p - t);
        }
        let h = 1e-5;
        for k in 0..4 {
            let mut up = logits;
            let mut down = logits;
            up[k] += h;
            down[k] -= h;
            let fd = (softmax_cross_entropy(&up, &target).unwrap().loss
                - softmax_cross_entropy(&down, &target).unwrap().loss)
                / (2.0 * h);
            assert!((fd - ce.grad[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let ce = softmax_cross_entropy(&[1000.0, -1000.0], &[0.0, 1.0]).unwrap();
        assert!((ce.loss - 2000.0).abs() < 1e-9);
        assert_eq!(ce.probs, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_targets() {
        assert_eq!(softmax_cross_entropy(&[0.0, 0.0], &[0.5, 0.5]), Err(NnError::InvalidTarget));
        assert_eq!(softmax_cross_entropy(&[0.0, 0.0], &[1.0]), Err(NnError::InvalidTarget));
        assert_eq!(softmax(&[f64::INFINITY]), Err(NnError::NonFinite("softmax input")));
    }
}
