//! Seeded trials, sample-size sweeps and grid search.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Algo, Collect, ExperimentConfig, Hyper, Mode};
use super::report::{ReportRow, SubOptReport};
use crate::bandits::{BanditInstance, Round};
use crate::data::{collect_adaptive, collect_eps_greedy, OfflineDataset};
use crate::error::{Error, Result};
use crate::policies::{
    kernlcb_fit, lcb_action, linlcb_fit, linear::neurallin_fit_with_mode, Decide, Kernel, NeuraLcb, NeuraLcbConfig,
    ScoreModel,
};
use crate::Network;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// SplitMix64 finalizer; derives independent stream seeds from one base seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_INSTANCE: u64 = 1;
const TAG_TEST: u64 = 2;
const TAG_SEARCH: u64 = 3;
const TAG_TRIAL: u64 = 1_000;
const TAG_DATA: u64 = 11;
const TAG_NET: u64 = 12;
const TAG_VALIDATION: u64 = 13;

/// Every seed a run derives from `config.seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedPlan {
    pub instance: u64,
    pub test: u64,
    pub search: u64,
    pub trials: Vec<u64>,
}

impl SeedPlan {
    pub fn new(seed: u64, trials: usize) -> Self {
        let plan = Self {
            instance: mix_seed(seed, TAG_INSTANCE),
            test: mix_seed(seed, TAG_TEST),
            search: mix_seed(seed, TAG_SEARCH),
            trials: (0..trials as u64).map(|i| mix_seed(seed, TAG_TRIAL + i)).collect(),
        };
        assert!(
            !plan.trials.contains(&plan.search) && plan.search != plan.test,
            "search seed collides with a report seed"
        );
        plan
    }
}

/// Draws the evaluation rounds: full contexts with exact mean rewards.
pub fn test_rounds(instance: &BanditInstance, n_te: usize, seed: u64) -> Vec<Round> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_te).map(|_| instance.sample_round(&mut rng)).collect()
}

/// Mean of `max_a h(x_a) − h(x_{π(x)})` over `n_te` seeded rounds.
pub fn evaluate_suboptimality<P: Decide + ?Sized>(
    policy: &P,
    instance: &BanditInstance,
    n_te: usize,
    seed: u64,
) -> Result<f64> {
    mean_regret(policy, &test_rounds(instance, n_te, seed))
}

/// Mean regret of `policy` over fixed rounds.
pub fn mean_regret<P: Decide + ?Sized>(policy: &P, rounds: &[Round]) -> Result<f64> {
    let mut total = 0.0;
    for r in rounds {
        total += r.regret(policy.decide(&r.context)?);
    }
    Ok(total / rounds.len().max(1) as f64)
}

/// Mean regret of the LCB rule at each β, scoring every round once.
pub fn mean_regret_for_betas<M: ScoreModel + ?Sized>(
    model: &M,
    rounds: &[Round],
    betas: &[f64],
) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; betas.len()];
    for r in rounds {
        let scores = model.arm_scores(&r.context)?;
        for (t, &b) in totals.iter_mut().zip(betas) {
            *t += r.regret(lcb_action(&scores, b));
        }
    }
    let n = rounds.len().max(1) as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

/// Logs `n` rounds under the configured behavior policy.
pub fn collect(config: &ExperimentConfig, instance: &BanditInstance, n: usize, seed: u64) -> Result<OfflineDataset> {
    match config.collect {
        Collect::EpsGreedy(eps) => collect_eps_greedy(instance, n, eps, seed),
        Collect::Adaptive(eps) => {
            collect_adaptive(instance, n, eps, seed, config.linucb_alpha, config.linucb_lambda)
        }
    }
}

/// Training-side hyperparameters; β is swept at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Fit {
    algo: Algo,
    eta: f64,
    sigma: f64,
    mode: Mode,
}

/// Regret table `[grid point][β]` for one algorithm on one log.
struct Curve {
    regret: Vec<Vec<f64>>,
    seconds: Vec<f64>,
}

fn neural_config(config: &ExperimentConfig, fit: &Fit, input_dim: usize, seed: u64) -> NeuraLcbConfig {
    let mut c = NeuraLcbConfig::practical(config.network(input_dim), fit.eta, 0.0, seed)
        .with_mode(fit.mode.training(config.batch_size, config.epochs));
    c.l2 = config.l2;
    c.lambda = config.lambda;
    c.covariance = config.covariance_mode(c.network.num_params());
    c
}

/// Fits `fit.algo` at every sample size in `ns` and scores each β.
/// Errors carry the failing sample size.
fn fit_curve(
    config: &ExperimentConfig,
    fit: &Fit,
    data: &OfflineDataset,
    net_seed: u64,
    rounds: &[Round],
    ns: &[usize],
    betas: &[f64],
) -> std::result::Result<Curve, (usize, Error)> {
    let dim = data.dim();
    let betas: &[f64] = if fit.algo.is_pessimistic() { betas } else { &[0.0] };
    let spread = |v: Vec<f64>| -> Vec<f64> {
        if v.len() == 1 { vec![v[0]; betas.len().max(1)] } else { v }
    };
    let mut regret = Vec::with_capacity(ns.len());
    let mut seconds = Vec::with_capacity(ns.len());

    if fit.algo.is_online() {
        let nc = neural_config(config, fit, dim, net_seed);
        let mut learner = if fit.algo == Algo::NeuraLcb {
            NeuraLcb::new(nc)
        } else {
            NeuraLcb::greedy(nc)
        }
        .map_err(|e| (ns[0], e))?;
        let mut elapsed = 0.0;
        for &n in ns {
            // π̂_n is the policy after the first n − 1 records.
            let clock = Instant::now();
            for rec in &data.records()[learner.steps() as usize..n - 1] {
                learner.update(rec).map_err(|e| (n, e))?;
            }
            elapsed += clock.elapsed().as_secs_f64();
            let policy = learner.policy();
            regret.push(mean_regret_for_betas(&policy, rounds, betas).map_err(|e| (n, e))?);
            seconds.push(elapsed);
        }
    } else {
        let init = match fit.algo {
            Algo::NeuralLinLcb | Algo::NeuralLinGreedy => {
                let net = config.network(dim);
                Some(Network::init_symmetric(net, net_seed).map_err(|e| (ns[0], e))?)
            }
            _ => None,
        };
        for &n in ns {
            let clock = Instant::now();
            let prefix = data.prefix(n);
            let model: Box<dyn ScoreModel> = match fit.algo {
                Algo::LinLcb => linlcb_fit(prefix, dim, config.lambda, 0.0).map(boxed),
                Algo::KernLcb => kernlcb_fit(
                    prefix,
                    config.lambda,
                    0.0,
                    Kernel::Rbf { sigma: fit.sigma },
                    config.kernel_cap,
                )
                .map(boxed),
                Algo::NeuralLinLcb | Algo::NeuralLinGreedy => {
                    let init = init.as_ref().expect("built above");
                    neurallin_fit_with_mode(
                        prefix,
                        config.lambda,
                        0.0,
                        init,
                        fit.algo == Algo::NeuralLinGreedy,
                        config.covariance_mode(init.num_params()),
                    )
                    .map(boxed)
                }
                Algo::NeuraLcb | Algo::NeuralGreedy => unreachable!("online algorithms handled above"),
            }
            .map_err(|e| (n, e))?;
            seconds.push(clock.elapsed().as_secs_f64());
            regret.push(mean_regret_for_betas(model.as_ref(), rounds, betas).map_err(|e| (n, e))?);
        }
    }
    Ok(Curve {
        regret: regret.into_iter().map(spread).collect(),
        seconds,
    })
}

fn boxed<M: ScoreModel + 'static>(m: M) -> Box<dyn ScoreModel> {
    Box::new(m)
}

/// Mean and 95% half-width across trials; zero width for a single trial.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * var.sqrt() / (n as f64).sqrt())
}

/// Chosen hyperparameters per algorithm.
pub type HyperChoice = BTreeMap<Algo, Hyper>;

/// Runs every configured algorithm with `config.hyper`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SubOptReport> {
    let choice = config.algos.iter().map(|&a| (a, config.hyper)).collect();
    run_with(config, &choice)
}

/// Runs every configured algorithm with its entry in `choice`
/// (`config.hyper` when absent).
pub fn run_with(config: &ExperimentConfig, choice: &HyperChoice) -> Result<SubOptReport> {
    config.validate()?;
    let seeds = SeedPlan::new(config.seed, config.trials);
    let instance = config.build_instance(seeds.instance)?;
    let rounds = test_rounds(&instance, config.n_te, seeds.test);
    let ns = config.sample_sizes();
    let horizon = *ns.last().expect("validated nonempty");

    let jobs: Vec<(usize, Algo)> = (0..config.trials)
        .flat_map(|t| config.algos.iter().map(move |&a| (t, a)))
        .collect();
    let datasets: Vec<OfflineDataset> = seeds
        .trials
        .par_iter()
        .map(|&s| collect(config, &instance, horizon, mix_seed(s, TAG_DATA)))
        .collect::<Result<_>>()?;

    let curves: Vec<Curve> = jobs
        .par_iter()
        .map(|&(trial, algo)| {
            let h = choice.get(&algo).copied().unwrap_or(config.hyper);
            let fit = Fit {
                algo,
                eta: h.eta,
                sigma: h.sigma,
                mode: h.mode,
            };
            let net_seed = mix_seed(seeds.trials[trial], TAG_NET);
            fit_curve(config, &fit, &datasets[trial], net_seed, &rounds, &ns, &[h.beta]).map_err(
                |(n, source)| Error::Fit {
                    algo: algo.id().to_string(),
                    n,
                    trial,
                    source: Box::new(source),
                },
            )
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (ai, &algo) in config.algos.iter().enumerate() {
        for (ni, &n) in ns.iter().enumerate() {
            let per_trial: Vec<&Curve> = (0..config.trials)
                .map(|t| &curves[t * config.algos.len() + ai])
                .collect();
            let values: Vec<f64> = per_trial.iter().map(|c| c.regret[ni][0]).collect();
            let (mean, half_width) = mean_ci(&values);
            let seconds = if config.timing {
                per_trial.iter().map(|c| c.seconds[ni]).sum::<f64>() / config.trials as f64
            } else {
                0.0
            };
            rows.push(ReportRow {
                algo: algo.id().to_string(),
                n,
                mean,
                half_width,
                trials: config.trials,
                seconds,
            });
        }
    }
    Ok(SubOptReport {
        bandit: instance.name.clone(),
        rows,
    })
}

/// Best setting found for one algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridWinner {
    pub algo: Algo,
    pub hyper: Hyper,
    /// Sub-optimality of the winner on the search log at the largest `n`.
    pub subopt: f64,
}

/// Every grid point of `algo`, in grid order.
fn candidates(config: &ExperimentConfig, algo: Algo) -> Vec<Fit> {
    let g = &config.grid;
    let base = Fit {
        algo,
        eta: config.hyper.eta,
        sigma: config.hyper.sigma,
        mode: config.hyper.mode,
    };
    match algo {
        Algo::NeuraLcb | Algo::NeuralGreedy => g
            .modes
            .iter()
            .flat_map(|&mode| g.etas.iter().map(move |&eta| Fit { mode, eta, ..base }))
            .collect(),
        Algo::KernLcb => g.sigmas.iter().map(|&sigma| Fit { sigma, ..base }).collect(),
        _ => vec![base],
    }
}

/// Evaluates every grid point on a dedicated search log (its own seed,
/// disjoint from the report seeds) at the largest sample size and returns
/// the argmin per algorithm. Ties keep the earliest grid point.
pub fn grid_search(config: &ExperimentConfig) -> Result<Vec<GridWinner>> {
    config.validate()?;
    let seeds = SeedPlan::new(config.seed, config.trials);
    let instance = config.build_instance(seeds.instance)?;
    let rounds = test_rounds(&instance, config.n_te, mix_seed(seeds.search, TAG_VALIDATION));
    let n = *config.sample_sizes().last().expect("validated nonempty");
    let data = collect(config, &instance, n, mix_seed(seeds.search, TAG_DATA))?;
    let net_seed = mix_seed(seeds.search, TAG_NET);
    let betas = &config.grid.betas;

    let jobs: Vec<Fit> = config.algos.iter().flat_map(|&a| candidates(config, a)).collect();
    let curves: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|fit| {
            fit_curve(config, fit, &data, net_seed, &rounds, &[n], betas)
                .map(|c| c.regret.into_iter().next().expect("one grid point"))
                .map_err(|(n, source)| Error::Fit {
                    algo: fit.algo.id().to_string(),
                    n,
                    trial: 0,
                    source: Box::new(source),
                })
        })
        .collect::<Result<_>>()?;

    let mut winners: Vec<GridWinner> = Vec::new();
    for (fit, regret) in jobs.iter().zip(&curves) {
        let beta_choices: Vec<f64> = if fit.algo.is_pessimistic() {
            betas.clone()
        } else {
            vec![config.hyper.beta]
        };
        for (&beta, &r) in beta_choices.iter().zip(regret) {
            let hyper = Hyper {
                beta,
                eta: fit.eta,
                sigma: fit.sigma,
                mode: fit.mode,
            };
            match winners.iter_mut().find(|w| w.algo == fit.algo) {
                Some(w) if r < w.subopt => {
                    w.hyper = hyper;
                    w.subopt = r;
                }
                Some(_) => {}
                None => winners.push(GridWinner {
                    algo: fit.algo,
                    hyper,
                    subopt: r,
                }),
            }
        }
    }
    Ok(winners)
}

/// Grid search followed by a full run with each algorithm's winner.
pub fn run_tuned(config: &ExperimentConfig) -> Result<(Vec<GridWinner>, SubOptReport)> {
    let winners = grid_search(config)?;
    let choice = winners.iter().map(|w| (w.algo, w.hyper)).collect();
    let report = run_with(config, &choice)?;
    Ok((winners, report))
}
