//! Decision rules learned from offline logs.
//!
//! Every learned rule scores each action with a point estimate and a
//! confidence width, then acts by `argmax_a mean_a − β·width_a` with exact
//! ties going to the lowest action index. Greedy variants are the `β = 0`
//! (or width-free) special case.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandits::FullContext;
use crate::error::{Error, Result};

pub mod kernel;
pub mod linear;
pub mod linucb;
pub mod neural;

pub use kernel::{kernlcb_fit, Kernel, KernelLcbModel};
pub use linear::{linlcb_fit, neurallin_fit, FeatureMap, LinearLcbModel};
pub use linucb::LinUcb;
pub use neural::{
    neural_greedy_run, neuralcb_run, NeuraLcb, NeuraLcbConfig, NeuralPolicy, ReturnRule, StepSize,
    TrainingMode,
};

/// Point estimate and confidence width for one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmScore {
    pub mean: f64,
    pub width: f64,
}

impl ArmScore {
    pub fn lower(&self, beta: f64) -> f64 {
        self.mean - beta * self.width
    }
}

/// Models that produce per-action estimates for a full context.
pub trait ScoreModel {
    fn arm_scores(&self, context: &FullContext) -> Result<Vec<ArmScore>>;
}

/// `argmax_a mean_a − β·width_a`; exact ties go to the smallest index.
pub fn lcb_action(scores: &[ArmScore], beta: f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, s) in scores.iter().enumerate() {
        let v = s.lower(beta);
        if v > best_score {
            best = a;
            best_score = v;
        }
    }
    best
}

/// A deterministic map from full contexts to actions.
pub trait Decide {
    fn decide(&self, context: &FullContext) -> Result<usize>;
}

impl<F> Decide for F
where
    F: Fn(&FullContext) -> usize,
{
    fn decide(&self, context: &FullContext) -> Result<usize> {
        Ok(self(context))
    }
}

/// Serializable snapshot of any learned policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Policy {
    Neural(NeuralPolicy),
    Linear(LinearLcbModel),
    Kernel(KernelLcbModel),
}

impl Policy {
    pub fn beta(&self) -> f64 {
        match self {
            Policy::Neural(p) => p.beta,
            Policy::Linear(p) => p.beta,
            Policy::Kernel(p) => p.beta,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        match &mut self {
            Policy::Neural(p) => p.beta = beta,
            Policy::Linear(p) => p.beta = beta,
            Policy::Kernel(p) => p.beta = beta,
        }
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

impl ScoreModel for Policy {
    fn arm_scores(&self, context: &FullContext) -> Result<Vec<ArmScore>> {
        match self {
            Policy::Neural(p) => p.arm_scores(context),
            Policy::Linear(p) => p.arm_scores(context),
            Policy::Kernel(p) => p.arm_scores(context),
        }
    }
}

macro_rules! decide_by_own_beta {
    ($($t:ty),*) => {$(
        impl Decide for $t {
            fn decide(&self, context: &FullContext) -> Result<usize> {
                Ok(lcb_action(&self.arm_scores(context)?, self.beta))
            }
        }
    )*};
}

decide_by_own_beta!(NeuralPolicy, LinearLcbModel, KernelLcbModel);

impl Decide for Policy {
    fn decide(&self, context: &FullContext) -> Result<usize> {
        Ok(lcb_action(&self.arm_scores(context)?, self.beta()))
    }
}
