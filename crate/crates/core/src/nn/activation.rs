use serde::{Deserialize, Serialize};

use super::{ensure_finite, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at `x`. `relu'(0)` is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activate(kind: Activation, x: &Tensor) -> Result<Tensor> {
    ensure_finite("activation input", x.data())?;
    let out = x.map(|v| kind.apply(v));
    ensure_finite("activation", out.data())?;
    Ok(out)
}

pub fn activation_derivative(kind: Activation, x: &Tensor) -> Result<Tensor> {
    ensure_finite("activation input", x.data())?;
    Ok(x.map(|v| kind.derivative(v)))
}
