//! Infinite-width NTK Gram matrix of the ReLU network, its smallest
//! eigenvalue, and the effective dimension `log det(I + H/λ) / log(1 + nK/λ)`.
//!
//! The layer recursion uses the closed-form arc-cosine expectations for a
//! bivariate Gaussian with covariance `[[s₁, c], [c, s₂]]`, `ρ = c/√(s₁s₂)`:
//!
//! ```text
//! E[σ(u)σ(v)]   = √(s₁s₂)/(2π) · (√(1−ρ²) + ρ(π − arccos ρ))
//! E[σ'(u)σ'(v)] = (π − arccos ρ)/(2π)
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{check_symmetric, Cholesky};
use crate::scalar::{dot, norm2};
use crate::Network;

const UNIT_NORM_TOL: f64 = 1e-6;
const RHO_TOL: f64 = 1e-9;

/// Symmetric `N × N` NTK Gram matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NtkGram {
    pub n: usize,
    pub depth: usize,
    pub h: Vec<f64>,
    /// `Σ⁽¹⁾, …, Σ⁽ᴸ⁾` when retained.
    pub sigma: Vec<Vec<f64>>,
    /// `H̃⁽¹⁾, …, H̃⁽ᴸ⁾` when retained.
    pub h_tilde: Vec<Vec<f64>>,
}

impl NtkGram {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.n + j]
    }
}

fn correlation(s1: f64, s2: f64, c: f64) -> Result<f64> {
    let rho = c / (s1 * s2).sqrt();
    if rho.abs() > 1.0 + RHO_TOL || rho.is_nan() {
        return Err(Error::Config(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(rho.clamp(-1.0, 1.0))
}

/// `E[σ(u)σ(v)]` and `E[σ'(u)σ'(v)]` for `(u, v) ~ N(0, [[s₁, c], [c, s₂]])`.
pub fn relu_expectations(s1: f64, s2: f64, c: f64) -> Result<(f64, f64)> {
    let rho = correlation(s1, s2, c)?;
    let theta = rho.acos();
    let value = (s1 * s2).sqrt() / (2.0 * PI) * ((1.0 - rho * rho).sqrt() + rho * (PI - theta));
    let slope = (PI - theta) / (2.0 * PI);
    Ok((value, slope))
}

pub fn ntk_gram(contexts: &[Vec<f64>], depth: usize) -> Result<NtkGram> {
    ntk_gram_with(contexts, depth, true)
}

/// NTK Gram over unit-norm `contexts` for a depth-`depth` network.
pub fn ntk_gram_with(contexts: &[Vec<f64>], depth: usize, retain: bool) -> Result<NtkGram> {
    if depth < 2 {
        return Err(Error::Config(format!("depth must be >= 2, got {depth}")));
    }
    let n = contexts.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = contexts[0].len();
    for (index, x) in contexts.iter().enumerate() {
        check_dim(d, x.len())?;
        let norm = norm2(x);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { index, norm });
        }
    }

    let mut sigma = vec![0.0; n * n];
    sigma
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = dot(&contexts[i], &contexts[j]);
            }
        });
    let mut h_tilde = sigma.clone();
    let mut sigma_layers = Vec::new();
    let mut h_tilde_layers = Vec::new();
    if retain {
        sigma_layers.push(sigma.clone());
        h_tilde_layers.push(h_tilde.clone());
    }

    for _ in 1..depth {
        let diag: Vec<f64> = (0..n).map(|i| sigma[i * n + i]).collect();
        let rows: Vec<Result<Vec<(f64, f64)>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (value, slope) = relu_expectations(diag[i], diag[j], sigma[i * n + j])?;
                        let s_next = 2.0 * value;
                        Ok((s_next, 2.0 * h_tilde[i * n + j] * slope + s_next))
                    })
                    .collect()
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            for (j, (s, h)) in row?.into_iter().enumerate() {
                sigma[i * n + j] = s;
                h_tilde[i * n + j] = h;
            }
        }
        if retain {
            sigma_layers.push(sigma.clone());
            h_tilde_layers.push(h_tilde.clone());
        }
    }

    let h = h_tilde
        .iter()
        .zip(&sigma)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(NtkGram {
        n,
        depth,
        h,
        sigma: sigma_layers,
        h_tilde: h_tilde_layers,
    })
}

/// Smallest eigenvalue of a symmetric row-major matrix.
pub fn min_eigenvalue(h: &[f64], n: usize) -> Result<f64> {
    let scale = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    check_symmetric(h, n, 1e-9 * scale)?;
    let m = DMatrix::from_row_slice(n, n, h);
    let eig = SymmetricEigen::new(m);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `log det(I + H/λ) / log(1 + nK/λ)` for an `(nK) × (nK)` PSD `H`.
pub fn effective_dim(h: &[f64], lambda: f64, samples: usize, actions: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("λ must be positive, got {lambda}")));
    }
    let nk = samples * actions;
    check_dim(nk * nk, h.len())?;
    let mut a: Vec<f64> = h.iter().map(|v| v / lambda).collect();
    for i in 0..nk {
        a[i * nk + i] += 1.0;
    }
    let log_det = Cholesky::factor(&a, nk)?.log_det();
    Ok(log_det / (1.0 + nk as f64 / lambda).ln())
}

/// `⟨∇f_{W⁽⁰⁾}(x_i), ∇f_{W⁽⁰⁾}(x_j)⟩ / m`.
pub fn empirical_gram(init: &Network, contexts: &[Vec<f64>]) -> Result<Vec<f64>> {
    let grads: Vec<Vec<f64>> = contexts
        .par_iter()
        .map(|x| init.gradient(x))
        .collect::<Result<_>>()?;
    let n = grads.len();
    let m = init.config().width as f64;
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&grads[i], &grads[j]) / m;
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    Ok(g)
}

/// NTK diagnostics for one context set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtkSummary {
    pub lambda0: f64,
    pub effective_dim: f64,
    pub nk: usize,
    pub lambda: f64,
}

/// Gram, `λ₀` and `d̃` for the contexts of `samples` rounds with `actions`
/// arms each (`contexts.len() == samples·actions`).
pub fn ntk_summary(
    contexts: &[Vec<f64>],
    depth: usize,
    lambda: f64,
    samples: usize,
    actions: usize,
) -> Result<NtkSummary> {
    check_dim(samples * actions, contexts.len())?;
    let gram = ntk_gram_with(contexts, depth, false)?;
    Ok(NtkSummary {
        lambda0: min_eigenvalue(&gram.h, gram.n)?,
        effective_dim: effective_dim(&gram.h, lambda, samples, actions)?,
        nk: gram.n,
        lambda,
    })
}
