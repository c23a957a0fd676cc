//! Regularized covariance `Λ_t = λI + Σ v_i v_iᵀ`, elliptical bonuses
//! `‖v‖_{Λ⁻¹}`, and confidence-width schedules.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Cholesky;
use crate::scalar::Scalar;

/// Parameter count above which [`CovarianceMode::auto`] picks the diagonal
/// approximation.
pub const DIAGONAL_THRESHOLD: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceMode {
    Full,
    Diagonal,
}

impl CovarianceMode {
    pub fn auto(dim: usize) -> Self {
        Self::auto_with_threshold(dim, DIAGONAL_THRESHOLD)
    }

    pub fn auto_with_threshold(dim: usize, threshold: usize) -> Self {
        if dim > threshold {
            CovarianceMode::Diagonal
        } else {
            CovarianceMode::Full
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceState<T> {
    mode: CovarianceMode,
    lambda: f64,
    dim: usize,
    // Full: row-major dim × dim. Diagonal: the dim diagonal entries.
    values: Vec<T>,
    updates: u64,
    // Cholesky factor of the current Full-mode matrix, built on first query.
    #[serde(skip)]
    factor: OnceLock<std::result::Result<Cholesky<T>, (usize, f64)>>,
}

impl<T: Scalar> CovarianceState<T> {
    /// `Λ_0 = λI`.
    pub fn new(dim: usize, lambda: f64, mode: CovarianceMode) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("covariance dimension must be >= 1".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("λ must be positive, got {lambda}")));
        }
        let l = T::of(lambda);
        let values = match mode {
            CovarianceMode::Full => {
                let mut v = vec![T::zero(); dim * dim];
                for i in 0..dim {
                    v[i * dim + i] = l;
                }
                v
            }
            CovarianceMode::Diagonal => vec![l; dim],
        };
        Ok(Self {
            mode,
            lambda,
            dim,
            values,
            updates: 0,
            factor: OnceLock::new(),
        })
    }

    pub fn mode(&self) -> CovarianceMode {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Raw storage: the full row-major matrix or the diagonal entries.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `Λ += v vᵀ` (Full) or `Λ_ii += v_i²` (Diagonal).
    pub fn rank1_update(&mut self, v: &[T]) -> Result<()> {
        self.rank1_update_scaled(v, T::one())
    }

    /// `Λ += c² · v vᵀ`; lets callers fold a `1/√m` factor into the update.
    pub fn rank1_update_scaled(&mut self, v: &[T], c: T) -> Result<()> {
        check_dim(self.dim, v.len())?;
        let c2 = c * c;
        match self.mode {
            CovarianceMode::Full => {
                let n = self.dim;
                for i in 0..n {
                    let vi = v[i] * c2;
                    if vi == T::zero() {
                        continue;
                    }
                    let row = &mut self.values[i * n..(i + 1) * n];
                    for (a, &vj) in row.iter_mut().zip(v) {
                        *a += vi * vj;
                    }
                }
                self.factor = OnceLock::new();
            }
            CovarianceMode::Diagonal => {
                for (a, &vi) in self.values.iter_mut().zip(v) {
                    *a += c2 * vi * vi;
                }
            }
        }
        self.updates += 1;
        Ok(())
    }

    fn cholesky(&self) -> Result<&Cholesky<T>> {
        let cached = self.factor.get_or_init(|| {
            Cholesky::factor(&self.values, self.dim).map_err(|e| match e {
                Error::NotPositiveDefinite { index, pivot } => (index, pivot),
                _ => (0, f64::NAN),
            })
        });
        cached
            .as_ref()
            .map_err(|&(index, pivot)| Error::NotPositiveDefinite { index, pivot })
    }

    /// `vᵀ Λ⁻¹ v`.
    pub fn inv_quadratic(&self, v: &[T]) -> Result<T> {
        check_dim(self.dim, v.len())?;
        match self.mode {
            CovarianceMode::Full => self.cholesky()?.inv_quadratic(v),
            CovarianceMode::Diagonal => {
                let mut acc = T::zero();
                for (index, (&vi, &d)) in v.iter().zip(&self.values).enumerate() {
                    if !(d > T::zero()) {
                        return Err(Error::NotPositiveDefinite {
                            index,
                            pivot: d.to_f64_lossy(),
                        });
                    }
                    acc += vi * vi / d;
                }
                Ok(acc)
            }
        }
    }

    /// `‖v‖_{Λ⁻¹} = √(vᵀ Λ⁻¹ v)`.
    pub fn bonus(&self, v: &[T]) -> Result<T> {
        Ok(self.inv_quadratic(v)?.max(T::zero()).sqrt())
    }

    /// `Λ⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, b.len())?;
        match self.mode {
            CovarianceMode::Full => self.cholesky()?.solve(b),
            CovarianceMode::Diagonal => Ok(b.iter().zip(&self.values).map(|(&x, &d)| x / d).collect()),
        }
    }

    /// `log det(Λ / λ)`.
    pub fn log_det_ratio(&self) -> Result<T> {
        let ln_lambda = T::of(self.lambda.ln());
        let n = T::of(self.dim as f64);
        let log_det = match self.mode {
            CovarianceMode::Full => self.cholesky()?.log_det(),
            CovarianceMode::Diagonal => self.values.iter().map(|d| d.ln()).sum(),
        };
        Ok(log_det - n * ln_lambda)
    }
}

/// Confidence multiplier `β_t` used by the lower confidence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaSchedule {
    Constant(f64),
    /// `β_t = √(λ + C₃² t L) · (√t/√λ + √(nK)/√λ₀) / √m`.
    Theoretical {
        lambda: f64,
        depth: usize,
        width: usize,
        samples: usize,
        actions: usize,
        lambda0: f64,
        c3: f64,
    },
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Constant(b) if b >= 0.0 && b.is_finite() => Ok(()),
            BetaSchedule::Constant(b) => Err(Error::Config(format!("β must be >= 0, got {b}"))),
            BetaSchedule::Theoretical {
                lambda,
                depth,
                width,
                samples,
                actions,
                lambda0,
                c3,
            } => {
                let ok = lambda > 0.0
                    && depth > 0
                    && width > 0
                    && samples > 0
                    && actions > 0
                    && lambda0 > 0.0
                    && c3 > 0.0;
                if ok {
                    Ok(())
                } else {
                    Err(Error::Config(
                        "theoretical β schedule needs positive λ, L, m, n, K, λ₀, C₃".into(),
                    ))
                }
            }
        }
    }

    pub fn at(&self, t: u64) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Theoretical {
                lambda,
                depth,
                width,
                samples,
                actions,
                lambda0,
                c3,
            } => {
                let t = t as f64;
                let radius = (lambda + c3 * c3 * t * depth as f64).sqrt();
                let spread = (t / lambda).sqrt() + ((samples * actions) as f64 / lambda0).sqrt();
                radius * spread / (width as f64).sqrt()
            }
        }
    }
}
