//! Kernel ridge LCB fitted on a capped prefix of the log.

use serde::{Deserialize, Serialize};

use super::{ArmScore, ScoreModel};
use crate::bandits::FullContext;
use crate::data::Record;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::scalar::dot;

/// Support-set cap applied to large logs.
pub const DEFAULT_CAP: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `exp(−‖u − v‖² / (2σ²))`
    Rbf { sigma: f64 },
    /// `uᵀv`; makes the model the dual form of linear ridge regression.
    Linear,
}

impl Kernel {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { sigma } => {
                let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Linear => dot(u, v),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelLcbModel {
    pub kernel: Kernel,
    pub lambda: f64,
    pub beta: f64,
    pub cap: usize,
    support: Vec<Vec<f64>>,
    // Cholesky factor of K_n + λI.
    factor: Cholesky<f64>,
    // (K_n + λI)⁻¹ y
    dual: Vec<f64>,
}

impl KernelLcbModel {
    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn dual_weights(&self) -> &[f64] {
        &self.dual
    }

    fn kernel_column(&self, u: &[f64]) -> Vec<f64> {
        self.support.iter().map(|s| self.kernel.eval(u, s)).collect()
    }

    /// `k_n(u)ᵀ(K_n + λI)⁻¹y`.
    pub fn predict(&self, u: &[f64]) -> f64 {
        dot(&self.kernel_column(u), &self.dual)
    }

    /// `k(u,u) − k_n(u)ᵀ(K_n + λI)⁻¹k_n(u)`, clamped at zero.
    pub fn variance(&self, u: &[f64]) -> Result<f64> {
        let k = self.kernel_column(u);
        let explained = if k.is_empty() { 0.0 } else { self.factor.inv_quadratic(&k)? };
        Ok((self.kernel.eval(u, u) - explained).max(0.0))
    }
}

impl ScoreModel for KernelLcbModel {
    fn arm_scores(&self, context: &FullContext) -> Result<Vec<ArmScore>> {
        context
            .arms()
            .map(|x| {
                let k = self.kernel_column(x);
                let mean = dot(&k, &self.dual);
                let explained = if k.is_empty() { 0.0 } else { self.factor.inv_quadratic(&k)? };
                let var = (self.kernel.eval(x, x) - explained).max(0.0);
                Ok(ArmScore {
                    mean,
                    width: var.sqrt(),
                })
            })
            .collect()
    }
}

/// Fits on the first `min(n, cap)` records only.
pub fn kernlcb_fit(
    data: &[Record],
    lambda: f64,
    beta: f64,
    kernel: Kernel,
    cap: usize,
) -> Result<KernelLcbModel> {
    if cap == 0 {
        return Err(Error::Config("kernel support cap must be >= 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("λ must be positive, got {lambda}")));
    }
    if let Kernel::Rbf { sigma } = kernel {
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("RBF bandwidth must be positive, got {sigma}")));
        }
    }
    let used = &data[..data.len().min(cap)];
    let support: Vec<Vec<f64>> = used.iter().map(|r| r.chosen().to_vec()).collect();
    let y: Vec<f64> = used.iter().map(|r| r.reward).collect();
    let n = support.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel.eval(&support[i], &support[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
        gram[i * n + i] += lambda;
    }
    let factor = Cholesky::factor(&gram, n)?;
    let dual = factor.solve(&y)?;
    Ok(KernelLcbModel {
        kernel,
        lambda,
        beta,
        cap,
        support,
        factor,
        dual,
    })
}
