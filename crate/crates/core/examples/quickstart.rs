use banditlab::bandits::{BanditInstance, RewardFamily, SyntheticSpec};
use banditlab::data::collect_eps_greedy;
use banditlab::harness::evaluate_suboptimality;
use banditlab::nn::NetworkConfig;
use banditlab::policies::{neuralcb_run, NeuraLcbConfig, TrainingMode};

fn main() -> banditlab::Result<()> {
    let spec = SyntheticSpec::new(RewardFamily::H3, 10, 0)?;
    let bandit = BanditInstance::synthetic(spec, 5, 0.1)?;
    let log = collect_eps_greedy(&bandit, 2000, 0.1, 1)?;

    let net = NetworkConfig::new(2, 20, bandit.dim());
    let config = NeuraLcbConfig::practical(net, 1e-3, 1.0, 7)
        .with_mode(TrainingMode::Batch { batch_size: 50, epochs: 100 });
    let policy = neuralcb_run(log.records(), config)?;

    let subopt = evaluate_suboptimality(&policy, &bandit, 2000, 99)?;
    println!("sub-optimality after {} samples: {subopt:.4}", log.len());
    Ok(())
}
