//! Dense symmetric positive-definite factorizations on row-major storage.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `A = L Lᵀ` of an `n × n` SPD matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cholesky<T> {
    n: usize,
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a row-major `n × n` matrix. Only the lower triangle is read.
    pub fn factor(a: &[T], n: usize) -> Result<Self> {
        check_dim(n * n, a.len())?;
        let mut lower = vec![T::zero(); n * n];
        for j in 0..n {
            let row_j = j * n;
            let mut diag = a[row_j + j];
            for k in 0..j {
                let l = lower[row_j + k];
                diag -= l * l;
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    pivot: diag.to_f64_lossy(),
                });
            }
            let pivot = diag.sqrt();
            lower[row_j + j] = pivot;
            for i in (j + 1)..n {
                let row_i = i * n;
                let mut s = a[row_i + j];
                for k in 0..j {
                    s -= lower[row_i + k] * lower[row_j + k];
                }
                lower[row_i + j] = s / pivot;
            }
        }
        Ok(Self { n, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[T]) -> Result<Vec<T>> {
        check_dim(self.n, b.len())?;
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: T = row.iter().zip(&y[..i]).map(|(&l, &v)| l * v).sum();
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        Ok(y)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        let mut x = self.solve_lower(b)?;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        Ok(x)
    }

    /// `bᵀ A⁻¹ b`, computed as `‖L⁻¹ b‖²`.
    pub fn inv_quadratic(&self, b: &[T]) -> Result<T> {
        let y = self.solve_lower(b)?;
        Ok(y.iter().map(|&v| v * v).sum())
    }

    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.n)
            .map(|i| two * self.lower[i * self.n + i].ln())
            .sum()
    }

    /// Smallest diagonal pivot of `L`.
    pub fn min_pivot(&self) -> T {
        (0..self.n)
            .map(|i| self.lower[i * self.n + i])
            .fold(T::infinity(), T::min)
    }
}

/// Checks that a row-major `n × n` matrix is symmetric within `tol`.
pub fn check_symmetric<T: Scalar>(a: &[T], n: usize, tol: f64) -> Result<()> {
    check_dim(n * n, a.len())?;
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[i * n + j] - a[j * n + i]).abs().to_f64_lossy();
            if gap > tol {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}
