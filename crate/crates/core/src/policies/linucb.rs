//! Online LinUCB, used as the history-dependent component of the adaptive
//! behavior policy.

use crate::bandits::FullContext;
use crate::error::{check_dim, Error, Result};
use crate::scalar::dot;

/// Shared ridge model over action vectors with an incrementally maintained
/// inverse `A⁻¹`, `A = λI + Σ x xᵀ`.
#[derive(Debug, Clone)]
pub struct LinUcb {
    dim: usize,
    alpha: f64,
    a_inv: Vec<f64>,
    b: Vec<f64>,
    theta: Vec<f64>,
    updates: usize,
}

impl LinUcb {
    pub fn new(dim: usize, lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("LinUCB λ must be positive, got {lambda}")));
        }
        if !(alpha >= 0.0) {
            return Err(Error::Config(format!("LinUCB α must be >= 0, got {alpha}")));
        }
        let mut a_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            a_inv[i * dim + i] = 1.0 / lambda;
        }
        Ok(Self {
            dim,
            alpha,
            a_inv,
            b: vec![0.0; dim],
            theta: vec![0.0; dim],
            updates: 0,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn inverse(&self) -> &[f64] {
        &self.a_inv
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    fn a_inv_times(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| dot(&self.a_inv[i * d..(i + 1) * d], x)).collect()
    }

    /// `⟨θ̂, x⟩ + α‖x‖_{A⁻¹}`.
    pub fn ucb(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let width = dot(x, &self.a_inv_times(x)).max(0.0).sqrt();
        Ok(dot(&self.theta, x) + self.alpha * width)
    }

    /// Highest-UCB action; ties go to the lowest index.
    pub fn act(&self, context: &FullContext) -> Result<usize> {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (a, x) in context.arms().enumerate() {
            let s = self.ucb(x)?;
            if s > best_score {
                best = a;
                best_score = s;
            }
        }
        Ok(best)
    }

    /// Sherman–Morrison update with the played vector and its reward.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let d = self.dim;
        let ax = self.a_inv_times(x);
        let denom = 1.0 + dot(x, &ax);
        for i in 0..d {
            let s = ax[i] / denom;
            let row = &mut self.a_inv[i * d..(i + 1) * d];
            for (a, &axj) in row.iter_mut().zip(&ax) {
                *a -= s * axj;
            }
        }
        for (bi, &xi) in self.b.iter_mut().zip(x) {
            *bi += reward * xi;
        }
        self.theta = self.a_inv_times(&self.b);
        self.updates += 1;
        Ok(())
    }
}
