//! Contextual bandit environments: synthetic reward families, bandits built
//! from classification data, and the mushroom eat/no-eat bandit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, norm2};

/// The `K` per-action feature vectors presented in one round, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullContext {
    actions: usize,
    dim: usize,
    features: Vec<f64>,
}

impl FullContext {
    pub fn from_flat(actions: usize, dim: usize, features: Vec<f64>) -> Result<Self> {
        check_dim(actions * dim, features.len())?;
        if actions == 0 || dim == 0 {
            return Err(Error::Config("full context needs K >= 1 and d >= 1".into()));
        }
        Ok(Self {
            actions,
            dim,
            features,
        })
    }

    pub fn from_arms(arms: &[Vec<f64>]) -> Result<Self> {
        let dim = arms.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(arms.len() * dim);
        for arm in arms {
            check_dim(dim, arm.len())?;
            features.extend_from_slice(arm);
        }
        Self::from_flat(arms.len(), dim, features)
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arm(&self, a: usize) -> &[f64] {
        &self.features[a * self.dim..(a + 1) * self.dim]
    }

    pub fn arms(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.features
    }
}

/// A sampled context together with the true mean reward of every action.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub context: FullContext,
    pub means: Vec<f64>,
}

impl Round {
    /// `v*(x) = max_a h(x_a)`.
    pub fn optimal_value(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Optimal action; ties go to the lowest index.
    pub fn optimal_action(&self) -> usize {
        argmax(&self.means)
    }

    pub fn regret(&self, action: usize) -> f64 {
        self.optimal_value() - self.means[action]
    }
}

/// Index of the largest value; exact ties resolve to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardFamily {
    /// `h(u) = 10 (uᵀa)²`
    H1,
    /// `h(u) = uᵀ AᵀA u`
    H2,
    /// `h(u) = cos(3 uᵀa)`
    H3,
}

impl std::str::FromStr for RewardFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h1" => Ok(RewardFamily::H1),
            "h2" => Ok(RewardFamily::H2),
            "h3" => Ok(RewardFamily::H3),
            _ => Err(Error::Config(format!("unknown reward family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: RewardFamily,
    pub dim: usize,
    /// Unit direction used by H1 and H3.
    pub direction: Vec<f64>,
    /// Row-major `d × d` Gaussian matrix used by H2.
    pub matrix: Vec<f64>,
}

impl SyntheticSpec {
    pub fn new(family: RewardFamily, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("context dimension must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let direction = sample_unit_sphere(dim, &mut rng);
        let matrix = (0..dim * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self {
            family,
            dim,
            direction,
            matrix,
        })
    }

    pub fn reward(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        Ok(match self.family {
            RewardFamily::H1 => {
                let p = dot(u, &self.direction);
                10.0 * p * p
            }
            RewardFamily::H2 => {
                // uᵀ AᵀA u = ‖A u‖²
                let d = self.dim;
                let mut acc = 0.0;
                for i in 0..d {
                    let row = &self.matrix[i * d..(i + 1) * d];
                    let au = dot(row, u);
                    acc += au * au;
                }
                acc
            }
            RewardFamily::H3 => (3.0 * dot(u, &self.direction)).cos(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    None,
    Gaussian { std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BanditKind {
    Synthetic(SyntheticSpec),
    /// Row-major `n × d` features with labels in `0..classes`.
    Classification {
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        classes: usize,
    },
    /// Two actions: 0 = eat, 1 = do not eat.
    Mushroom {
        features: Vec<f64>,
        dim: usize,
        edible: Vec<bool>,
    },
}

/// Reward paid for eating an edible mushroom, and for a lucky poisonous one.
pub const MUSHROOM_GOOD: f64 = 5.0;
/// Reward for an unlucky poisonous mushroom.
pub const MUSHROOM_BAD: f64 = -35.0;
/// Probability that a poisonous mushroom pays [`MUSHROOM_BAD`].
pub const MUSHROOM_BAD_PROB: f64 = 0.5;
pub const MUSHROOM_EAT: usize = 0;
pub const MUSHROOM_SKIP: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub name: String,
    pub kind: BanditKind,
    pub actions: usize,
    pub noise: Noise,
    /// Apply `x ↦ [x, x]/√2` to every emitted action vector.
    pub duplicate: bool,
}

impl BanditInstance {
    /// Synthetic bandit with `K` i.i.d. uniform-on-sphere action vectors per
    /// round and Gaussian reward noise of standard deviation `noise_std`.
    pub fn synthetic(spec: SyntheticSpec, actions: usize, noise_std: f64) -> Result<Self> {
        if actions == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        let name = format!("{:?}", spec.family).to_lowercase();
        let noise = if noise_std > 0.0 {
            Noise::Gaussian { std: noise_std }
        } else {
            Noise::None
        };
        Ok(Self {
            name,
            kind: BanditKind::Synthetic(spec),
            actions,
            noise,
            duplicate: false,
        })
    }

    /// K-class classification problem as a K-armed bandit with block
    /// contexts `x^a = (0, …, x, …, 0)` and reward 1 for the true class.
    pub fn classification(features: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(features.len(), labels.len())?;
        if classes == 0 {
            return Err(Error::Config("need at least one class".into()));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let dim = features[0].len();
        let mut flat = Vec::with_capacity(features.len() * dim);
        for row in features {
            check_dim(dim, row.len())?;
            flat.extend_from_slice(row);
        }
        Ok(Self {
            name: "classification".into(),
            kind: BanditKind::Classification {
                features: flat,
                dim,
                labels: labels.to_vec(),
                classes,
            },
            actions: classes,
            noise: Noise::None,
            duplicate: false,
        })
    }

    pub fn mushroom(features: &[Vec<f64>], edible: &[bool]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(features.len(), edible.len())?;
        let dim = features[0].len();
        let mut flat = Vec::with_capacity(features.len() * dim);
        for row in features {
            check_dim(dim, row.len())?;
            flat.extend_from_slice(row);
        }
        Ok(Self {
            name: "mushroom".into(),
            kind: BanditKind::Mushroom {
                features: flat,
                dim,
                edible: edible.to_vec(),
            },
            actions: 2,
            noise: Noise::None,
            duplicate: false,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_duplication(mut self, on: bool) -> Self {
        self.duplicate = on;
        self
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    /// Dimension of each emitted action vector.
    pub fn dim(&self) -> usize {
        let base = match &self.kind {
            BanditKind::Synthetic(spec) => spec.dim,
            BanditKind::Classification { dim, classes, .. } => dim * classes,
            BanditKind::Mushroom { dim, .. } => dim * 2,
        };
        if self.duplicate {
            2 * base
        } else {
            base
        }
    }

    /// Range `[lo, hi]` of the mean reward function.
    pub fn reward_range(&self) -> (f64, f64) {
        match &self.kind {
            BanditKind::Synthetic(spec) => match spec.family {
                RewardFamily::H1 => (0.0, 10.0),
                RewardFamily::H2 => {
                    // Largest eigenvalue of AᵀA is at most its trace.
                    (0.0, spec.matrix.iter().map(|v| v * v).sum())
                }
                RewardFamily::H3 => (-1.0, 1.0),
            },
            BanditKind::Classification { .. } => (0.0, 1.0),
            BanditKind::Mushroom { .. } => (
                MUSHROOM_BAD_PROB * MUSHROOM_BAD + (1.0 - MUSHROOM_BAD_PROB) * MUSHROOM_GOOD,
                MUSHROOM_GOOD,
            ),
        }
    }

    /// Draws one round: the full context and every action's mean reward.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Round {
        let k = self.actions;
        let (arms, means): (Vec<Vec<f64>>, Vec<f64>) = match &self.kind {
            BanditKind::Synthetic(spec) => (0..k)
                .map(|_| {
                    let x = sample_unit_sphere(spec.dim, rng);
                    let h = spec.reward(&x).expect("dimension fixed by construction");
                    (x, h)
                })
                .unzip(),
            BanditKind::Classification {
                features,
                dim,
                labels,
                ..
            } => {
                let row = rng.random_range(0..labels.len());
                let x = &features[row * dim..(row + 1) * dim];
                let arms = block_contexts(x, k);
                let means = (0..k).map(|a| (a == labels[row]) as u8 as f64).collect();
                (arms, means)
            }
            BanditKind::Mushroom {
                features,
                dim,
                edible,
            } => {
                let row = rng.random_range(0..edible.len());
                let x = &features[row * dim..(row + 1) * dim];
                let eat = if edible[row] {
                    MUSHROOM_GOOD
                } else {
                    MUSHROOM_BAD_PROB * MUSHROOM_BAD + (1.0 - MUSHROOM_BAD_PROB) * MUSHROOM_GOOD
                };
                (block_contexts(x, 2), vec![eat, 0.0])
            }
        };
        let arms: Vec<Vec<f64>> = if self.duplicate {
            arms.iter().map(|x| duplicate_transform(x)).collect()
        } else {
            arms
        };
        Round {
            context: FullContext::from_arms(&arms).expect("consistent arm shapes"),
            means,
        }
    }

    /// Realized reward for playing `action` in `round`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, round: &Round, action: usize, rng: &mut R) -> f64 {
        let mean = round.means[action];
        match &self.kind {
            BanditKind::Mushroom { .. } => {
                if action == MUSHROOM_EAT && mean < MUSHROOM_GOOD {
                    if rng.random::<f64>() < MUSHROOM_BAD_PROB {
                        MUSHROOM_BAD
                    } else {
                        MUSHROOM_GOOD
                    }
                } else {
                    mean
                }
            }
            _ => match self.noise {
                Noise::None => mean,
                Noise::Gaussian { std } => {
                    let n: f64 = StandardNormal.sample(rng);
                    mean + std * n
                }
            },
        }
    }

    /// Seeded draw of one full context.
    pub fn sample_full_context(&self, seed: u64) -> FullContext {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_round(&mut rng).context
    }
}

fn block_contexts(x: &[f64], k: usize) -> Vec<Vec<f64>> {
    let d = x.len();
    (0..k)
        .map(|a| {
            let mut v = vec![0.0; d * k];
            v[a * d..(a + 1) * d].copy_from_slice(x);
            v
        })
        .collect()
}

pub fn sample_unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = unit_sphere_transform(&v) {
            return u;
        }
    }
}

/// `x / ‖x‖₂`.
pub fn unit_sphere_transform(x: &[f64]) -> Result<Vec<f64>> {
    let n = norm2(x);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / n).collect())
}

/// `x ↦ [x, x]/√2`; preserves the norm and makes the halves identical.
pub fn duplicate_transform(x: &[f64]) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    x.iter().chain(x).map(|v| v * s).collect()
}

/// Labelled Gaussian blobs: class centers with i.i.d. `N(0, separation²)`
/// coordinates, points with unit-variance isotropic noise around them.
pub fn gaussian_blobs(
    n: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Normal::new(0.0, separation).expect("finite separation");
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| center.sample(&mut rng)).collect())
        .collect();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.random_range(0..classes);
        let row = centers[y]
            .iter()
            .map(|c| c + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>();
        features.push(row);
        labels.push(y);
    }
    (features, labels)
}
