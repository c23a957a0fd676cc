//! Fully-connected ReLU network `f_W(u) = √m · W_L σ(W_{L-1} σ(… σ(W_1 u)))`
//! with symmetric initialization and exact backpropagation.
//!
//! Parameters live in one flat buffer, layer by layer, row-major within a
//! layer. The same order is used by [`NetworkParams::gradient`], so gradient
//! vectors can be fed straight into a covariance accumulator.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

const LAYER_NORM_EPS: f64 = 1e-5;
const CHECKPOINT_MAGIC: &[u8; 8] = b"BLNET001";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of weight layers `L >= 2`.
    pub depth: usize,
    /// Hidden width `m`, even.
    pub width: usize,
    /// Input dimension `d`, even.
    pub input_dim: usize,
    /// Normalize hidden pre-activations to zero mean / unit variance.
    pub layer_norm: bool,
}

impl NetworkConfig {
    pub fn new(depth: usize, width: usize, input_dim: usize) -> Self {
        Self {
            depth,
            width,
            input_dim,
            layer_norm: false,
        }
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.layer_norm = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!("depth must be >= 2, got {}", self.depth)));
        }
        if self.width < 2 || !self.width.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "width must be an even integer >= 2, got {}",
                self.width
            )));
        }
        if self.input_dim < 2 || !self.input_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "input dimension must be an even integer >= 2, got {}",
                self.input_dim
            )));
        }
        Ok(())
    }

    /// `p = m·d + m + m²·(L−2)`.
    pub fn num_params(&self) -> usize {
        let m = self.width;
        m * self.input_dim + m + m * m * (self.depth - 2)
    }

    /// `(rows, cols)` of layer `l` (0-based). The output layer is `1 × m`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let m = self.width;
        if l == 0 {
            (m, self.input_dim)
        } else if l + 1 < self.depth {
            (m, m)
        } else {
            (1, m)
        }
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.depth + 1);
        let mut acc = 0;
        offsets.push(0);
        for l in 0..self.depth {
            let (r, c) = self.layer_shape(l);
            acc += r * c;
            offsets.push(acc);
        }
        offsets
    }
}

/// Network weights plus the frozen copy taken at initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<T> {
    config: NetworkConfig,
    offsets: Vec<usize>,
    weights: Vec<T>,
    init: Vec<T>,
}

/// Per-layer quantities kept from the forward pass for backpropagation.
struct Trace<T> {
    // Input to each weight layer: u, σ(y_1), …, σ(y_{L-1}).
    inputs: Vec<Vec<T>>,
    // Post-normalization pre-activations y_l (equal to z_l without layer norm).
    normalized: Vec<Vec<T>>,
    // 1/√(var + ε) per hidden layer when layer norm is on.
    inv_std: Vec<T>,
    output: T,
}

impl<T: Scalar> NetworkParams<T> {
    /// Symmetric initialization: hidden layers are `[W̄, 0; 0, W̄]` with
    /// `W̄ ~ N(0, 4/m)` entries and the output layer is `[w, −w]` with
    /// `w ~ N(0, 2/m)`.
    pub fn init_symmetric(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = config.width;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = Normal::new(0.0, (4.0 / m as f64).sqrt()).expect("valid std");
        let output = Normal::new(0.0, (2.0 / m as f64).sqrt()).expect("valid std");

        let offsets = config.layer_offsets();
        let mut weights = vec![T::zero(); config.num_params()];
        for l in 0..config.depth {
            let (rows, cols) = config.layer_shape(l);
            let layer = &mut weights[offsets[l]..offsets[l + 1]];
            if l + 1 < config.depth {
                let (hr, hc) = (rows / 2, cols / 2);
                for i in 0..hr {
                    for j in 0..hc {
                        let v = T::of(hidden.sample(&mut rng));
                        layer[i * cols + j] = v;
                        layer[(i + hr) * cols + (j + hc)] = v;
                    }
                }
            } else {
                let half = cols / 2;
                for j in 0..half {
                    let v = T::of(output.sample(&mut rng));
                    layer[j] = v;
                    layer[j + half] = -v;
                }
            }
        }
        Ok(Self {
            config,
            offsets,
            init: weights.clone(),
            weights,
        })
    }

    /// Builds a network from explicit flat weights; the init snapshot is set
    /// to the same values.
    pub fn from_flat(config: NetworkConfig, weights: Vec<T>) -> Result<Self> {
        config.validate()?;
        check_dim(config.num_params(), weights.len())?;
        Ok(Self {
            config,
            offsets: config.layer_offsets(),
            init: weights.clone(),
            weights,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.weights.len()
    }

    pub fn flat(&self) -> &[T] {
        &self.weights
    }

    pub fn flat_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn init_snapshot(&self) -> &[T] {
        &self.init
    }

    /// Row-major view of layer `l` (0-based).
    pub fn layer(&self, l: usize) -> &[T] {
        &self.weights[self.offsets[l]..self.offsets[l + 1]]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [T] {
        let (a, b) = (self.offsets[l], self.offsets[l + 1]);
        &mut self.weights[a..b]
    }

    fn trace(&self, u: &[T]) -> Result<Trace<T>> {
        check_dim(self.config.input_dim, u.len())?;
        let depth = self.config.depth;
        let mut inputs = Vec::with_capacity(depth);
        let mut normalized = Vec::with_capacity(depth - 1);
        let mut inv_std = Vec::with_capacity(depth - 1);
        inputs.push(u.to_vec());
        for l in 0..depth - 1 {
            let (rows, cols) = self.config.layer_shape(l);
            let w = self.layer(l);
            let a = &inputs[l];
            let mut z: Vec<T> = (0..rows)
                .map(|i| {
                    w[i * cols..(i + 1) * cols]
                        .iter()
                        .zip(a)
                        .map(|(&x, &y)| x * y)
                        .sum()
                })
                .collect();
            if self.config.layer_norm {
                let n = T::of(rows as f64);
                let mean = z.iter().copied().sum::<T>() / n;
                let var = z.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                let s = (var + T::of(LAYER_NORM_EPS)).sqrt().recip();
                for v in z.iter_mut() {
                    *v = (*v - mean) * s;
                }
                inv_std.push(s);
            }
            inputs.push(z.iter().map(|&v| v.max(T::zero())).collect());
            normalized.push(z);
        }
        let out_w = self.layer(depth - 1);
        let scale = T::of(self.config.width as f64).sqrt();
        let output = scale * crate::scalar::dot(out_w, &inputs[depth - 1]);
        Ok(Trace {
            inputs,
            normalized,
            inv_std,
            output,
        })
    }

    pub fn forward(&self, u: &[T]) -> Result<T> {
        Ok(self.trace(u)?.output)
    }

    /// Exact gradient of `forward` with respect to all weights, flattened.
    /// The ReLU derivative at exactly 0 is taken as 0.
    pub fn gradient(&self, u: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_with_gradient(u)?.1)
    }

    pub fn forward_with_gradient(&self, u: &[T]) -> Result<(T, Vec<T>)> {
        let trace = self.trace(u)?;
        let mut grad = vec![T::zero(); self.num_params()];
        self.backprop(&trace, T::one(), &mut grad);
        Ok((trace.output, grad))
    }

    // Accumulates `upstream · ∇f` into `grad`.
    fn backprop(&self, trace: &Trace<T>, upstream: T, grad: &mut [T]) {
        let depth = self.config.depth;
        let scale = T::of(self.config.width as f64).sqrt() * upstream;

        let last = depth - 1;
        let g_last = &mut grad[self.offsets[last]..self.offsets[last + 1]];
        for (g, &a) in g_last.iter_mut().zip(&trace.inputs[last]) {
            *g += scale * a;
        }
        let mut delta: Vec<T> = self.layer(last).iter().map(|&w| scale * w).collect();

        for l in (0..last).rev() {
            let (rows, cols) = self.config.layer_shape(l);
            let y = &trace.normalized[l];
            let mut dz: Vec<T> = delta
                .iter()
                .zip(y)
                .map(|(&d, &v)| if v > T::zero() { d } else { T::zero() })
                .collect();
            if self.config.layer_norm {
                // dz = s · (dy − mean(dy) − y · mean(dy ⊙ y))
                let n = T::of(rows as f64);
                let mean_dy = dz.iter().copied().sum::<T>() / n;
                let mean_dyy = dz.iter().zip(y).map(|(&a, &b)| a * b).sum::<T>() / n;
                let s = trace.inv_std[l];
                for (d, &v) in dz.iter_mut().zip(y) {
                    *d = s * (*d - mean_dy - v * mean_dyy);
                }
            }
            let a = &trace.inputs[l];
            let g_layer = &mut grad[self.offsets[l]..self.offsets[l + 1]];
            for i in 0..rows {
                let di = dz[i];
                if di == T::zero() {
                    continue;
                }
                let row = &mut g_layer[i * cols..(i + 1) * cols];
                for (g, &aj) in row.iter_mut().zip(a) {
                    *g += di * aj;
                }
            }
            if l > 0 {
                let w = self.layer(l);
                let mut next = vec![T::zero(); cols];
                for i in 0..rows {
                    let di = dz[i];
                    if di == T::zero() {
                        continue;
                    }
                    for (n, &wij) in next.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
                        *n += di * wij;
                    }
                }
                delta = next;
            }
        }
    }

    /// `½‖W − W⁽⁰⁾‖²_F`.
    pub fn half_sq_distance_from_init(&self) -> T {
        let half = T::of(0.5);
        half * self
            .weights
            .iter()
            .zip(&self.init)
            .map(|(&w, &w0)| (w - w0) * (w - w0))
            .sum::<T>()
    }

    /// `½(f(u) − r)² + (mλ/2)‖W − W⁽⁰⁾‖²_F`.
    pub fn loss(&self, u: &[T], reward: T, l2: T) -> Result<T> {
        let f = self.forward(u)?;
        let m = T::of(self.config.width as f64);
        Ok(T::of(0.5) * (f - reward) * (f - reward) + m * l2 * self.half_sq_distance_from_init())
    }

    /// Gradient of [`loss`](Self::loss): `∇f·(f(u) − r) + mλ·(W − W⁽⁰⁾)`.
    pub fn loss_gradient(&self, u: &[T], reward: T, l2: T) -> Result<Vec<T>> {
        self.batch_loss_gradient(std::iter::once((u, reward)), l2)
    }

    /// Gradient of `Σ_q (1/2B)(f(u_q) − r_q)² + (mλ/2)‖W − W⁽⁰⁾‖²_F`.
    pub fn batch_loss_gradient<'a, I>(&self, batch: I, l2: T) -> Result<Vec<T>>
    where
        I: IntoIterator<Item = (&'a [T], T)>,
    {
        let mut grad = vec![T::zero(); self.num_params()];
        let mut count = 0usize;
        for (u, r) in batch {
            let trace = self.trace(u)?;
            self.backprop(&trace, trace.output - r, &mut grad);
            count += 1;
        }
        if count > 1 {
            let inv = T::of(count as f64).recip();
            grad.iter_mut().for_each(|g| *g *= inv);
        }
        let reg = T::of(self.config.width as f64) * l2;
        if reg != T::zero() {
            for ((g, &w), &w0) in grad.iter_mut().zip(&self.weights).zip(&self.init) {
                *g += reg * (w - w0);
            }
        }
        Ok(grad)
    }

    /// Writes the binary checkpoint: magic, `L`, `m`, `d` as little-endian
    /// `u32`, the layer-norm flag as one byte, then `p` current weights and
    /// `p` initial weights as little-endian `f64`.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        for v in [self.config.depth, self.config.width, self.config.input_dim] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        out.write_all(&[self.config.layer_norm as u8])?;
        for &w in self.weights.iter().chain(&self.init) {
            out.write_all(&w.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("bad network checkpoint: {msg}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag).map_err(|_| bad("truncated header"))?;
        let config = NetworkConfig {
            depth: dims[0],
            width: dims[1],
            input_dim: dims[2],
            layer_norm: flag[0] != 0,
        };
        config.validate()?;
        let p = config.num_params();
        let mut values = Vec::with_capacity(2 * p);
        let mut b = [0u8; 8];
        for _ in 0..2 * p {
            input.read_exact(&mut b).map_err(|_| bad("truncated weights"))?;
            values.push(T::of(f64::from_le_bytes(b)));
        }
        let init = values.split_off(p);
        Ok(Self {
            config,
            offsets: config.layer_offsets(),
            weights: values,
            init,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(file))
    }
}
