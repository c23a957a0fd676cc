//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i * n..(i + 1) * n].to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Dense inverse via Gauss–Jordan elimination.
pub fn invert_dense(a: &[f64], n: usize) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i * n..(i + 1) * n].to_vec();
            row.extend((0..n).map(|j| (i == j) as u8 as f64));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().flat_map(|row| row[n..].to_vec()).collect()
}

pub fn quad_form(a: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| v[i] * (0..n).map(|j| a[i * n + j] * v[j]).sum::<f64>())
        .sum()
}

/// Ridge solution `(λI + ΦᵀΦ)⁻¹ Φᵀy` from explicit normal equations.
pub fn ridge(features: &[Vec<f64>], targets: &[f64], lambda: f64) -> Vec<f64> {
    let p = features[0].len();
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for (phi, &y) in features.iter().zip(targets) {
        for i in 0..p {
            rhs[i] += phi[i] * y;
            for j in 0..p {
                gram[i * p + j] += phi[i] * phi[j];
            }
        }
    }
    for i in 0..p {
        gram[i * p + i] += lambda;
    }
    solve_dense(&gram, &rhs, p)
}

pub fn unit_vector<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Monte-Carlo NTK: each layer's Gaussian expectations are estimated by
/// sampling `(u, v)` from the current 2×2 covariance instead of using the
/// arc-cosine closed form. Uses antithetic pairs for variance reduction.
pub fn ntk_monte_carlo<R: Rng>(contexts: &[Vec<f64>], depth: usize, samples: usize, rng: &mut R) -> Vec<f64> {
    let n = contexts.len();
    let mut sigma = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sigma[i * n + j] = contexts[i].iter().zip(&contexts[j]).map(|(a, b)| a * b).sum();
        }
    }
    let mut h_tilde = sigma.clone();
    for _ in 1..depth {
        let mut next_sigma = vec![0.0; n * n];
        let mut next_h = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let (a, b, c) = (sigma[i * n + i], sigma[j * n + j], sigma[i * n + j]);
                // Cholesky of [[a, c], [c, b]].
                let l11 = a.sqrt();
                let l21 = c / l11;
                let l22 = (b - l21 * l21).max(0.0).sqrt();
                // Antithetic pairs (z, −z): `samples` draws in total.
                let (mut ev, mut ed) = (0.0, 0.0);
                for _ in 0..samples / 2 {
                    let z1: f64 = StandardNormal.sample(rng);
                    let z2: f64 = StandardNormal.sample(rng);
                    let u = l11 * z1;
                    let v = l21 * z1 + l22 * z2;
                    for (u, v) in [(u, v), (-u, -v)] {
                        ev += u.max(0.0) * v.max(0.0);
                        if u > 0.0 && v > 0.0 {
                            ed += 1.0;
                        }
                    }
                }
                let samples = 2 * (samples / 2);
                let s = 2.0 * ev / samples as f64;
                let h = 2.0 * h_tilde[i * n + j] * ed / samples as f64 + s;
                for (p, q) in [(i, j), (j, i)] {
                    next_sigma[p * n + q] = s;
                    next_h[p * n + q] = h;
                }
            }
        }
        sigma = next_sigma;
        h_tilde = next_h;
    }
    h_tilde.iter().zip(&sigma).map(|(h, s)| 0.5 * (h + s)).collect()
}

/// Smallest `|z|` over hidden pre-activations (after normalization when
/// layer norm is on), recomputed from the raw layer weights.
pub fn kink_margin(net: &banditlab::Network, u: &[f64]) -> f64 {
    let config = *net.config();
    let mut a = u.to_vec();
    let mut margin = f64::INFINITY;
    for l in 0..config.depth - 1 {
        let (rows, cols) = config.layer_shape(l);
        let w = net.layer(l);
        let mut z: Vec<f64> = (0..rows)
            .map(|i| (0..cols).map(|j| w[i * cols + j] * a[j]).sum())
            .collect();
        if config.layer_norm {
            let mean = z.iter().sum::<f64>() / rows as f64;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            let s = 1.0 / (var + 1e-5).sqrt();
            z.iter_mut().for_each(|v| *v = (*v - mean) * s);
        }
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        a = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    margin
}
