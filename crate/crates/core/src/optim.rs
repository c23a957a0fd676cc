//! SGD and bias-corrected Adam over flat parameter buffers.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub adam: AdamHyper,
    /// Coefficient `λ` of the `(mλ/2)‖W − W⁽⁰⁾‖²` penalty in the training loss.
    pub l2: f64,
    first: Vec<T>,
    second: Vec<T>,
    steps: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn sgd(num_params: usize, learning_rate: f64, l2: f64) -> Self {
        Self::new(OptimizerKind::Sgd, num_params, learning_rate, l2)
    }

    pub fn adam(num_params: usize, learning_rate: f64, l2: f64) -> Self {
        Self::new(OptimizerKind::Adam, num_params, learning_rate, l2)
    }

    pub fn new(kind: OptimizerKind, num_params: usize, learning_rate: f64, l2: f64) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => num_params,
        };
        Self {
            kind,
            learning_rate,
            adam: AdamHyper::default(),
            l2,
            first: vec![T::zero(); moments],
            second: vec![T::zero(); moments],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn moments(&self) -> (&[T], &[T]) {
        (&self.first, &self.second)
    }

    /// Applies one update in place to `params` using `grad`.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        check_dim(params.len(), grad.len())?;
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        self.steps += 1;
        let lr = T::of(self.learning_rate);
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, &g) in params.iter_mut().zip(grad) {
                    *w -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                check_dim(params.len(), self.first.len())?;
                let b1 = T::of(self.adam.beta1);
                let b2 = T::of(self.adam.beta2);
                let eps = T::of(self.adam.eps);
                let one = T::one();
                let t = self.steps as i32;
                let c1 = one - b1.powi(t);
                let c2 = one - b2.powi(t);
                for (((w, &g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
