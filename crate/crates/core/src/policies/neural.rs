//! Neural lower-confidence-bound learner and its greedy counterpart.
//!
//! The learner walks the offline log once, in order. At step `t` it first
//! emits the policy defined by the pre-update weights `W⁽ᵗ⁻¹⁾` and
//! covariance `Λ_{t−1}`, then folds `∇f(x_{t,a_t})/√m` into `Λ` and trains
//! on the record (one step in single mode, `J` mini-batch steps over the
//! data seen so far in batch mode).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArmScore, ScoreModel};
use crate::bandits::FullContext;
use crate::confidence::{BetaSchedule, CovarianceMode};
use crate::data::{OfflineDataset, Record};
use crate::error::{check_dim, Error, Result};
use crate::nn::NetworkConfig;
use crate::optim::OptimizerKind;
use crate::{Covariance, Network, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingMode {
    /// One optimizer step on the newest record.
    Single,
    /// `epochs` steps, each on `batch_size` records drawn with replacement
    /// from everything seen so far.
    Batch { batch_size: usize, epochs: usize },
}

impl TrainingMode {
    pub const DEFAULT_BATCH: TrainingMode = TrainingMode::Batch {
        batch_size: 50,
        epochs: 100,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnRule {
    /// A uniformly drawn member of `{π̂_1, …, π̂_n}`.
    UniformEnsemble,
    /// `π̂_n`.
    Latest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    Constant(f64),
    /// `η_t = ι/√t`.
    InverseSqrt(f64),
}

impl StepSize {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSize::Constant(eta) => eta,
            StepSize::InverseSqrt(iota) => iota / (t.max(1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuraLcbConfig {
    pub network: NetworkConfig,
    pub init_seed: u64,
    pub optimizer: OptimizerKind,
    pub step_size: StepSize,
    /// `λ` of the `(mλ/2)‖W − W⁽⁰⁾‖²` training penalty.
    pub l2: f64,
    /// `λ` of `Λ_0 = λI`.
    pub lambda: f64,
    pub covariance: CovarianceMode,
    pub beta: BetaSchedule,
    pub mode: TrainingMode,
    pub return_rule: ReturnRule,
    /// Seeds mini-batch sampling and ensemble selection.
    pub seed: u64,
}

impl NeuraLcbConfig {
    /// Adam, constant β, diagonal covariance, latest policy returned.
    pub fn practical(network: NetworkConfig, learning_rate: f64, beta: f64, seed: u64) -> Self {
        Self {
            network,
            init_seed: seed,
            optimizer: OptimizerKind::Adam,
            step_size: StepSize::Constant(learning_rate),
            l2: 1e-4,
            lambda: 0.1,
            covariance: CovarianceMode::Diagonal,
            beta: BetaSchedule::Constant(beta),
            mode: TrainingMode::Single,
            return_rule: ReturnRule::Latest,
            seed,
        }
    }

    /// Plain SGD with `η_t = ι/√t`, the same `λ` for the penalty and `Λ_0`,
    /// and a uniformly sampled ensemble member as output.
    pub fn theoretical(network: NetworkConfig, iota: f64, lambda: f64, beta: BetaSchedule, seed: u64) -> Self {
        Self {
            network,
            init_seed: seed,
            optimizer: OptimizerKind::Sgd,
            step_size: StepSize::InverseSqrt(iota),
            l2: lambda,
            lambda,
            covariance: CovarianceMode::auto(network.num_params()),
            beta,
            mode: TrainingMode::Single,
            return_rule: ReturnRule::UniformEnsemble,
            seed,
        }
    }

    pub fn with_mode(mut self, mode: TrainingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.beta.validate()?;
        if let TrainingMode::Batch { batch_size, epochs } = self.mode {
            if batch_size == 0 || epochs == 0 {
                return Err(Error::Config("batch size and epoch count must be >= 1".into()));
            }
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("λ must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Frozen decision rule `argmax_a f(x_a) − β ‖∇f(x_a)/√m‖_{Λ⁻¹}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralPolicy {
    pub params: Network,
    /// `None` for greedy policies.
    pub covariance: Option<Covariance>,
    pub beta: f64,
}

impl ScoreModel for NeuralPolicy {
    fn arm_scores(&self, context: &FullContext) -> Result<Vec<ArmScore>> {
        let m = self.params.config().width as f64;
        context
            .arms()
            .map(|x| match &self.covariance {
                Some(cov) => {
                    let (mean, g) = self.params.forward_with_gradient(x)?;
                    let width = (cov.inv_quadratic(&g)? / m).max(0.0).sqrt();
                    Ok(ArmScore { mean, width })
                }
                None => Ok(ArmScore {
                    mean: self.params.forward(x)?,
                    width: 0.0,
                }),
            })
            .collect()
    }
}

/// Learner state: weights, optimizer, covariance and replay buffer.
#[derive(Debug, Clone)]
pub struct NeuraLcb {
    config: NeuraLcbConfig,
    params: Network,
    optimizer: Optimizer,
    covariance: Option<Covariance>,
    replay: Vec<(Vec<f64>, f64)>,
    batch_rng: ChaCha8Rng,
    t: u64,
}

impl NeuraLcb {
    pub fn new(config: NeuraLcbConfig) -> Result<Self> {
        Self::build(config, true)
    }

    /// Same training loop without covariance tracking; decisions use the
    /// raw prediction.
    pub fn greedy(config: NeuraLcbConfig) -> Result<Self> {
        Self::build(config, false)
    }

    fn build(config: NeuraLcbConfig, pessimistic: bool) -> Result<Self> {
        config.validate()?;
        let params = Network::init_symmetric(config.network, config.init_seed)?;
        let p = params.num_params();
        let optimizer = Optimizer::new(config.optimizer, p, config.step_size.at(1), config.l2);
        let covariance = if pessimistic {
            Some(Covariance::new(p, config.lambda, config.covariance)?)
        } else {
            None
        };
        let mut batch_rng = ChaCha8Rng::seed_from_u64(config.seed);
        batch_rng.set_stream(1);
        Ok(Self {
            config,
            params,
            optimizer,
            covariance,
            replay: Vec::new(),
            batch_rng,
            t: 0,
        })
    }

    pub fn config(&self) -> &NeuraLcbConfig {
        &self.config
    }

    pub fn params(&self) -> &Network {
        &self.params
    }

    pub fn covariance(&self) -> Option<&Covariance> {
        self.covariance.as_ref()
    }

    /// Number of records consumed so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// The policy the next step would emit: current weights, current
    /// covariance, and `β_t` for `t` records consumed.
    pub fn policy(&self) -> NeuralPolicy {
        NeuralPolicy {
            params: self.params.clone(),
            covariance: self.covariance.clone(),
            beta: if self.covariance.is_some() {
                self.config.beta.at(self.t)
            } else {
                0.0
            },
        }
    }

    /// Emits `π̂_t` from the pre-update state, then trains on `record`.
    pub fn step(&mut self, record: &Record) -> Result<NeuralPolicy> {
        let policy = self.policy();
        self.update(record)?;
        Ok(policy)
    }

    /// Trains on `record` without materializing the emitted policy.
    pub fn update(&mut self, record: &Record) -> Result<()> {
        let x = record.chosen();
        check_dim(self.config.network.input_dim, x.len())?;
        self.t += 1;
        let (f, g) = self.params.forward_with_gradient(x)?;
        if let Some(cov) = &mut self.covariance {
            let scale = (self.config.network.width as f64).sqrt().recip();
            cov.rank1_update_scaled(&g, scale)?;
        }
        self.optimizer.learning_rate = self.config.step_size.at(self.t);
        match self.config.mode {
            TrainingMode::Single => {
                let reg = self.config.network.width as f64 * self.config.l2;
                let residual = f - record.reward;
                let grad: Vec<f64> = g
                    .iter()
                    .zip(self.params.flat().iter().zip(self.params.init_snapshot()))
                    .map(|(&gi, (&w, &w0))| gi * residual + reg * (w - w0))
                    .collect();
                self.optimizer.step(self.params.flat_mut(), &grad)?;
            }
            TrainingMode::Batch { batch_size, epochs } => {
                self.replay.push((x.to_vec(), record.reward));
                let n = self.replay.len();
                for _ in 0..epochs {
                    let idx: Vec<usize> = (0..batch_size)
                        .map(|_| self.batch_rng.random_range(0..n))
                        .collect();
                    let batch = idx.iter().map(|&i| (self.replay[i].0.as_slice(), self.replay[i].1));
                    let grad = self.params.batch_loss_gradient(batch, self.config.l2)?;
                    self.optimizer.step(self.params.flat_mut(), &grad)?;
                }
            }
        }
        Ok(())
    }
}

fn run(data: &[Record], config: NeuraLcbConfig, pessimistic: bool) -> Result<NeuralPolicy> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(config.network.input_dim, data[0].context.dim())?;
    let mut learner = NeuraLcb::build(config, pessimistic)?;
    let n = data.len();
    // Index (0-based) of the returned member of {π̂_1, …, π̂_n}.
    let pick = match config.return_rule {
        ReturnRule::Latest => n - 1,
        ReturnRule::UniformEnsemble => ChaCha8Rng::seed_from_u64(config.seed).random_range(0..n),
    };
    for rec in &data[..pick] {
        learner.update(rec)?;
    }
    Ok(learner.policy())
}

/// Runs the pessimistic learner over `data` in order and returns the policy
/// selected by the configured return rule.
pub fn neuralcb_run(data: &[Record], config: NeuraLcbConfig) -> Result<NeuralPolicy> {
    run(data, config, true)
}

/// Greedy counterpart of [`neuralcb_run`]: identical training, decisions by
/// `argmax_a f(x_a)`.
pub fn neural_greedy_run(data: &[Record], config: NeuraLcbConfig) -> Result<NeuralPolicy> {
    run(data, config, false)
}

impl OfflineDataset {
    pub fn fit_neuralcb(&self, config: NeuraLcbConfig) -> Result<NeuralPolicy> {
        neuralcb_run(self.records(), config)
    }
}
