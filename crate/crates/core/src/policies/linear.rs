//! Ridge-regression LCB over raw contexts or frozen network-gradient
//! features.

use serde::{Deserialize, Serialize};

use super::{ArmScore, ScoreModel};
use crate::bandits::FullContext;
use crate::confidence::CovarianceMode;
use crate::data::Record;
use crate::error::{Error, Result};
use crate::scalar::dot;
use crate::{Covariance, Network};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FeatureMap {
    Raw,
    /// `φ(u) = vec(∇f_{W⁽⁰⁾}(u))` for a network that is never trained.
    FrozenNetGradient(Network),
}

impl FeatureMap {
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Raw => Ok(u.to_vec()),
            FeatureMap::FrozenNetGradient(net) => net.gradient(u),
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Raw => input_dim,
            FeatureMap::FrozenNetGradient(net) => net.num_params(),
        }
    }
}

/// `L(u) = ⟨θ̂, φ(u)⟩ − β‖φ(u)‖_{Λ⁻¹}` with `Λ = λI + Σ φφᵀ` and
/// `θ̂ = Λ⁻¹ Σ φ r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearLcbModel {
    pub theta: Vec<f64>,
    pub covariance: Covariance,
    pub beta: f64,
    pub features: FeatureMap,
}

impl LinearLcbModel {
    pub fn fit(
        data: &[Record],
        input_dim: usize,
        lambda: f64,
        beta: f64,
        features: FeatureMap,
        mode: CovarianceMode,
    ) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::Config(format!("β must be >= 0, got {beta}")));
        }
        let p = features.output_dim(input_dim);
        let mut covariance = Covariance::new(p, lambda, mode)?;
        let mut moment = vec![0.0; p];
        for rec in data {
            let phi = features.apply(rec.chosen())?;
            covariance.rank1_update(&phi)?;
            for (m, &v) in moment.iter_mut().zip(&phi) {
                *m += v * rec.reward;
            }
        }
        let theta = covariance.solve(&moment)?;
        Ok(Self {
            theta,
            covariance,
            beta,
            features,
        })
    }

    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        Ok(dot(&self.theta, &self.features.apply(u)?))
    }
}

impl ScoreModel for LinearLcbModel {
    fn arm_scores(&self, context: &FullContext) -> Result<Vec<ArmScore>> {
        context
            .arms()
            .map(|x| {
                let phi = self.features.apply(x)?;
                Ok(ArmScore {
                    mean: dot(&self.theta, &phi),
                    width: self.covariance.bonus(&phi)?,
                })
            })
            .collect()
    }
}

/// Linear LCB on raw context vectors with a full covariance.
pub fn linlcb_fit(data: &[Record], dim: usize, lambda: f64, beta: f64) -> Result<LinearLcbModel> {
    LinearLcbModel::fit(data, dim, lambda, beta, FeatureMap::Raw, CovarianceMode::Full)
}

/// Linear LCB on the frozen gradient features of `init`; `greedy` drops
/// the bonus. Covariance is full for small `p` and diagonal beyond
/// [`DIAGONAL_THRESHOLD`](crate::confidence::DIAGONAL_THRESHOLD).
pub fn neurallin_fit(
    data: &[Record],
    lambda: f64,
    beta: f64,
    init: &Network,
    greedy: bool,
) -> Result<LinearLcbModel> {
    let mode = CovarianceMode::auto(init.num_params());
    neurallin_fit_with_mode(data, lambda, beta, init, greedy, mode)
}

pub fn neurallin_fit_with_mode(
    data: &[Record],
    lambda: f64,
    beta: f64,
    init: &Network,
    greedy: bool,
    mode: CovarianceMode,
) -> Result<LinearLcbModel> {
    let beta = if greedy { 0.0 } else { beta };
    let dim = init.config().input_dim;
    LinearLcbModel::fit(
        data,
        dim,
        lambda,
        beta,
        FeatureMap::FrozenNetGradient(init.clone()),
        mode,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{Decide, Policy};

    fn record(x: Vec<f64>, r: f64) -> Record {
        Record {
            context: FullContext::from_arms(&[x]).unwrap(),
            action: 0,
            reward: r,
        }
    }

    #[test]
    fn single_sample_scalar_ridge() {
        let model = linlcb_fit(&[record(vec![1.0, 0.0, 0.0], 1.0)], 3, 1.0, 1.0).unwrap();
        assert!((model.theta[0] - 0.5).abs() < 1e-15);
        assert_eq!(&model.theta[1..], &[0.0, 0.0]);
        assert_eq!(
            model.covariance.values(),
            &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn zero_beta_is_ridge_argmax() {
        let data = vec![record(vec![1.0, 0.0], 1.0), record(vec![0.0, 1.0], 0.2)];
        let model = linlcb_fit(&data, 2, 0.1, 0.0).unwrap();
        let ctx = FullContext::from_arms(&[vec![0.0, 1.0], vec![0.9, 0.0]]).unwrap();
        assert_eq!(Policy::Linear(model).decide(&ctx).unwrap(), 1);
    }

    #[test]
    fn greedy_flag_equals_zero_beta() {
        use crate::nn::NetworkConfig;
        let net = Network::init_symmetric(NetworkConfig::new(2, 4, 2), 3).unwrap();
        let data = vec![record(vec![0.6, 0.8], 1.0), record(vec![1.0, 0.0], 0.0)];
        let g = neurallin_fit(&data, 0.1, 5.0, &net, true).unwrap();
        let z = neurallin_fit(&data, 0.1, 0.0, &net, false).unwrap();
        assert_eq!(g.theta, z.theta);
        assert_eq!(g.beta, 0.0);
        assert_eq!(g.theta.len(), net.num_params());
        let ctx = FullContext::from_arms(&[vec![0.0, 1.0], vec![0.8, -0.6]]).unwrap();
        assert_eq!(
            Policy::Linear(g).decide(&ctx).unwrap(),
            Policy::Linear(z).decide(&ctx).unwrap()
        );
    }
}
