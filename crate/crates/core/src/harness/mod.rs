//! Experiment orchestration: seeded trials over a sample-size grid,
//! sub-optimality with 95% intervals, grid search, CSV and SVG output.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{Algo, BanditSpec, Collect, ExperimentConfig, Hyper, HyperGrid, Mode};
pub use experiment::{
    evaluate_suboptimality, grid_search, mean_ci, mean_regret, mean_regret_for_betas, mix_seed,
    run_experiment, run_tuned, run_with, test_rounds, GridWinner, HyperChoice, SeedPlan,
};
pub use report::{
    csv_string, emit_outputs, format_sig, parse_csv, read_csv, svg_string, CsvRow, ReportRow,
    SubOptReport,
};

use crate::error::Result;
use crate::ntk::{ntk_summary, NtkSummary};

/// NTK diagnostics on the action vectors of `samples` seeded rounds of the
/// configured bandit.
pub fn ntk_diagnostics(config: &ExperimentConfig, samples: usize) -> Result<NtkSummary> {
    let seeds = SeedPlan::new(config.seed, config.trials);
    let instance = config.build_instance(seeds.instance)?;
    let rounds = test_rounds(&instance, samples, seeds.test);
    let contexts: Vec<Vec<f64>> = rounds
        .iter()
        .flat_map(|r| r.context.arms().map(<[f64]>::to_vec).collect::<Vec<_>>())
        .collect();
    ntk_summary(&contexts, config.depth, config.lambda, samples, instance.num_actions())
}
