//! Acceptance checks. Runs each criterion in order and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

mod common;

use std::time::Instant;

use banditlab::bandits::{
    duplicate_transform, BanditInstance, BanditKind, Round, SyntheticSpec, RewardFamily,
    MUSHROOM_EAT, MUSHROOM_SKIP,
};
use banditlab::confidence::CovarianceMode;
use banditlab::data::{collect_eps_greedy, compute_kappa, Behavior};
use banditlab::harness::{self, ExperimentConfig};
use banditlab::nn::NetworkConfig;
use banditlab::ntk::{effective_dim, ntk_gram};
use banditlab::policies::linear::neurallin_fit_with_mode;
use banditlab::policies::{kernlcb_fit, linlcb_fit, Kernel};
use banditlab::{Covariance, Network};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gradient_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-3;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let depth = rng.random_range(2..=4);
        let width = 2 * rng.random_range(1..=4);
        let dim = 2 * rng.random_range(1..=3);
        let config = NetworkConfig::new(depth, width, dim).with_layer_norm(rng.random_bool(0.5));
        // Central differences are only meaningful away from ReLU kinks. A
        // perturbation can kill a whole hidden layer, leaving every later
        // pre-activation at exactly 0; such a network is redrawn.
        let (net, u) = 'draw: loop {
            let mut net = Network::init_symmetric(config, case).unwrap();
            for w in net.flat_mut() {
                *w += 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            }
            for _ in 0..1000 {
                let u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if kink_margin(&net, &u) > 0.05 {
                    break 'draw (net, u);
                }
            }
        };
        let g = net.gradient(&u).unwrap();
        let mut err = 0.0f64;
        for k in 0..g.len() {
            let mut plus = net.clone();
            plus.flat_mut()[k] += h;
            let mut minus = net.clone();
            minus.flat_mut()[k] -= h;
            let fd = (plus.forward(&u).unwrap() - minus.forward(&u).unwrap()) / (2.0 * h);
            err = err.max((fd - g[k]).abs());
        }
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        worst = worst.max(err / scale);
    }
    outcome(worst < 1e-4, format!("max relative inf-norm error {worst:.3e}"))
}

fn symmetric_init_zero() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inputs: Vec<Vec<f64>> = (0..50).map(|_| duplicate_transform(&unit_vector(5, &mut rng))).collect();
    let mut worst = 0.0f64;
    let mut bound = f64::INFINITY;
    for seed in 0..10 {
        for ln in [false, true] {
            let config = NetworkConfig::new(2 + (seed as usize % 2), 20, 10).with_layer_norm(ln);
            let net = Network::init_symmetric(config, seed).unwrap();
            bound = bound.min(1e-4 * (config.width as f64).sqrt());
            for x in &inputs {
                worst = worst.max(net.forward(x).unwrap().abs());
            }
        }
    }
    outcome(worst < bound, format!("max |f| = {worst:.3e}"))
}

fn covariance_oracles() -> Outcome {
    let p = 50;
    let lambda = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cov = Covariance::new(p, lambda, CovarianceMode::Full).unwrap();
    let mut dense = vec![0.0; p * p];
    let mut sm = vec![0.0; p * p];
    for i in 0..p {
        dense[i * p + i] = lambda;
        sm[i * p + i] = 1.0 / lambda;
    }
    for _ in 0..500 {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        cov.rank1_update(&v).unwrap();
        for i in 0..p {
            for j in 0..p {
                dense[i * p + j] += v[i] * v[j];
            }
        }
        let av: Vec<f64> = (0..p).map(|i| (0..p).map(|j| sm[i * p + j] * v[j]).sum()).collect();
        let denom = 1.0 + v.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..p {
            for j in 0..p {
                sm[i * p + j] -= av[i] * av[j] / denom;
            }
        }
    }
    let inv = invert_dense(&dense, p);
    let (mut e_dense, mut e_sm) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let q: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b = cov.bonus(&q).unwrap();
        e_dense = e_dense.max((b - quad_form(&inv, &q).sqrt()).abs());
        e_sm = e_sm.max((b - quad_form(&sm, &q).sqrt()).abs());
    }
    outcome(
        e_dense < 1e-8 && e_sm < 1e-8,
        format!("dense-inverse gap {e_dense:.3e}, Sherman-Morrison gap {e_sm:.3e}"),
    )
}

fn ridge_oracles() -> Outcome {
    let spec = SyntheticSpec::new(RewardFamily::H1, 6, 4).unwrap();
    let bandit = BanditInstance::synthetic(spec, 3, 0.1).unwrap();
    let data = collect_eps_greedy(&bandit, 300, 0.2, 5).unwrap();
    let recs = data.records();
    let lambda = 0.1;
    let rewards: Vec<f64> = recs.iter().map(|r| r.reward).collect();

    let lin = linlcb_fit(recs, 6, lambda, 1.0).unwrap();
    let raw: Vec<Vec<f64>> = recs.iter().map(|r| r.chosen().to_vec()).collect();
    let lin_gap = max_gap(&lin.theta, &ridge(&raw, &rewards, lambda));

    let init = Network::init_symmetric(NetworkConfig::new(2, 6, 6), 6).unwrap();
    let nl = neurallin_fit_with_mode(recs, lambda, 1.0, &init, false, CovarianceMode::Full).unwrap();
    let grads: Vec<Vec<f64>> = raw.iter().map(|x| init.gradient(x).unwrap()).collect();
    let nl_gap = max_gap(&nl.theta, &ridge(&grads, &rewards, lambda));

    let kern = kernlcb_fit(recs, lambda, 1.0, Kernel::Linear, 1_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut kern_gap = 0.0f64;
    for _ in 0..50 {
        let u = unit_vector(6, &mut rng);
        kern_gap = kern_gap.max((kern.predict(&u) - lin.predict(&u).unwrap()).abs());
    }
    outcome(
        lin_gap < 1e-8 && nl_gap < 1e-8 && kern_gap < 1e-6,
        format!("linear {lin_gap:.3e}, gradient-feature {nl_gap:.3e}, kernel dual vs primal {kern_gap:.3e}"),
    )
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ntk_monte_carlo_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let contexts: Vec<Vec<f64>> = (0..8).map(|_| unit_vector(4, &mut rng)).collect();
    let (mut worst, mut diag) = (0.0f64, 0.0f64);
    for depth in [2, 3] {
        let g = ntk_gram(&contexts, depth).unwrap();
        let mc = ntk_monte_carlo(&contexts, depth, 1_000_000, &mut rng);
        worst = worst.max(max_gap(&g.h, &mc));
        for layer in &g.sigma {
            for i in 0..8 {
                diag = diag.max((layer[i * 8 + i] - 1.0).abs());
            }
        }
    }
    outcome(
        worst < 1e-2 && diag < 1e-12,
        format!("max |H - H_mc| = {worst:.3e}, max |diag sigma - 1| = {diag:.1e}"),
    )
}

fn effective_dimension_identity() -> Outcome {
    let mut h = vec![0.0; 16];
    for i in 0..4 {
        h[i * 4 + i] = 1.0;
    }
    let got = effective_dim(&h, 1.0, 2, 2).unwrap();
    let want = 4.0 * 2f64.ln() / 5f64.ln();
    outcome((got - want).abs() < 1e-9, format!("d_eff = {got:.9} (expected {want:.9})"))
}

fn kappa_and_logging_frequency() -> Outcome {
    let k = 30;
    let eps = 0.1;
    let kappa = compute_kappa(Behavior::EpsGreedy { eps }, k).value().unwrap();
    let spec = SyntheticSpec::new(RewardFamily::H1, 4, 9).unwrap();
    let bandit = BanditInstance::synthetic(spec, k, 0.0).unwrap();
    let n = 100_000;
    let data = collect_eps_greedy(&bandit, n, eps, 10).unwrap();
    let BanditKind::Synthetic(spec) = &bandit.kind else { unreachable!() };
    let hits = data
        .records()
        .iter()
        .filter(|r| {
            let means: Vec<f64> = r.context.arms().map(|x| spec.reward(x).unwrap()).collect();
            banditlab::bandits::argmax(&means) == r.action
        })
        .count();
    let p = 1.0 - eps + eps / k as f64;
    let freq = hits as f64 / n as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    outcome(
        (kappa - 1.107_011_07).abs() < 1e-6
            && harness::format_sig(kappa, 6) == "1.10701"
            && (kappa - 1.0 / p).abs() < 1e-12 && (freq - p).abs() < 3.0 * sd,
        format!("kappa = {kappa:.6}, optimal-action frequency {freq:.6} vs {p:.6} (3 sd = {:.2e})", 3.0 * sd),
    )
}

fn desk_config(bandit: &str, algos: &str, collect: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.set("bandit", bandit).unwrap();
    c.set("algo", algos).unwrap();
    c.set("collect", collect).unwrap();
    c.set("n_grid", "2000").unwrap();
    c
}

fn neural_vs_linear_ordering() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for bandit in ["h1", "h3"] {
        let config = desk_config(bandit, "neuralcb,linlcb,neurallinlcb", "eps:0.1");
        let (winners, report) = harness::run_tuned(&config).unwrap();
        let mean = |a: &str| report.row(a, 2000).unwrap().mean;
        let (nc, lin, nl) = (mean("neuralcb"), mean("linlcb"), mean("neurallinlcb"));
        pass &= nc <= 0.8 * lin && nc <= 0.8 * nl;
        let chosen: Vec<String> = winners
            .iter()
            .map(|w| format!("{}:beta={}", w.algo, w.hyper.beta))
            .collect();
        lines.push(format!(
            "{bandit}: neuralcb {nc:.4}, linlcb {lin:.4}, neurallinlcb {nl:.4} [{}]",
            chosen.join(" ")
        ));
    }
    outcome(pass, lines.join("; "))
}

fn pessimism_vs_greedy(collect: &str) -> Outcome {
    let mut config = desk_config("blobs:3", "neuralcb,neuralgreedy", collect);
    config.dim = 10;
    let (winners, report) = harness::run_tuned(&config).unwrap();
    let lcb = report.row("neuralcb", 2000).unwrap().mean;
    let greedy = report.row("neuralgreedy", 2000).unwrap().mean;
    let chosen: Vec<String> = winners
        .iter()
        .map(|w| format!("{}:mode={},eta={},beta={}", w.algo, w.hyper.mode, w.hyper.eta, w.hyper.beta))
        .collect();
    outcome(
        lcb <= greedy,
        format!("neuralcb {lcb:.4} vs neuralgreedy {greedy:.4} [{}]", chosen.join(" ")),
    )
}

fn end_to_end_determinism() -> Outcome {
    let mut config = ExperimentConfig::default();
    config.set("bandit", "h2").unwrap();
    config.set("T", "300").unwrap();
    config.set("n_grid", "100,200,300").unwrap();
    config.set("trials", "3").unwrap();
    config.set("n_te", "300").unwrap();
    config.set("mode", "b").unwrap();
    config.set("epochs", "5").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let report = harness::run_experiment(&config).unwrap();
        let out = dir.path().join(run);
        harness::emit_outputs(&report, &out).unwrap();
        bytes.push(std::fs::read(out.join("results.csv")).unwrap());
    }
    outcome(
        bytes[0] == bytes[1] && bytes[0].len() > 100,
        format!("{} bytes, identical = {}", bytes[0].len(), bytes[0] == bytes[1]),
    )
}

fn mushroom_reward_law() -> Outcome {
    let features = vec![vec![1.0, 0.0]];
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mean_of = |edible: bool, action: usize| {
        let bandit = BanditInstance::mushroom(&features, &[edible]).unwrap();
        let round: Round = bandit.sample_round(&mut rng);
        (0..draws)
            .map(|_| bandit.sample_reward(&round, action, &mut rng))
            .sum::<f64>()
            / draws as f64
    };
    let eat_edible = mean_of(true, MUSHROOM_EAT);
    let eat_poison = mean_of(false, MUSHROOM_EAT);
    let skip = (mean_of(true, MUSHROOM_SKIP) + mean_of(false, MUSHROOM_SKIP)) / 2.0;
    outcome(
        (eat_edible - 5.0).abs() < 0.5 && (eat_poison + 15.0).abs() < 0.5 && skip.abs() < 0.5,
        format!("eat edible {eat_edible:.3}, eat poisonous {eat_poison:.3}, skip {skip:.3}"),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let checks: Vec<(u32, &str, Option<f64>, Check)> = vec![
        (1, "gradient vs central differences", Some(10.0), gradient_finite_differences),
        (2, "symmetric init is zero on duplicated inputs", Some(1.0), symmetric_init_zero),
        (3, "covariance bonus vs dense and rank-one oracles", Some(5.0), covariance_oracles),
        (4, "ridge and kernel-dual oracles", Some(10.0), ridge_oracles),
        (5, "NTK closed form vs Monte Carlo", Some(60.0), ntk_monte_carlo_check),
        (6, "effective dimension at H = lambda I", None, effective_dimension_identity),
        (7, "kappa and logged optimal-action frequency", None, kappa_and_logging_frequency),
        (8, "neural LCB beats linear baselines on h1 and h3", Some(600.0), neural_vs_linear_ordering),
        (9, "pessimism vs greedy, eps-greedy logs", Some(600.0), || pessimism_vs_greedy("eps:0.1")),
        (10, "pessimism vs greedy, adaptive logs", Some(600.0), || pessimism_vs_greedy("adaptive:0.9")),
        (11, "byte-identical results.csv across runs", None, end_to_end_determinism),
        (12, "mushroom reward means", None, mushroom_reward_law),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check);
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => {
                let in_time = budget.is_none_or(|b| secs < b);
                let extra = if in_time { String::new() } else { " [over time budget]".into() };
                (o.pass && in_time, format!("{}{extra}", o.detail))
            }
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} ({secs:.1}s)",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
