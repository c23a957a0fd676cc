use std::path::PathBuf;
use std::process::ExitCode;

use banditlab::harness::{self, ExperimentConfig, GridWinner};
use banditlab::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Offline contextual-bandit experiments.
#[derive(Parser)]
#[command(name = "bandit-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials with fixed hyperparameters.
    Run(Common),
    /// Grid-search hyperparameters, then run with the winners.
    /// `--beta`, `--eta`, `--sigma` and `--mode` take comma-separated grids.
    Grid(Common),
    /// Print NTK diagnostics (lambda0, effective dimension) for a bandit.
    Ntk {
        #[command(flatten)]
        common: Common,
        /// Rounds whose action vectors enter the Gram matrix.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Starting preset: desk or full.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// key = value config file; environment `BANDITLAB_<KEY>` and flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm id, or a comma-separated list.
    #[arg(long)]
    algo: Option<String>,
    /// h1 | h2 | h3 | mushroom:<path> | classify:<path> | blobs:<classes>
    #[arg(long)]
    bandit: Option<String>,
    /// Offline log size per trial.
    #[arg(long = "T")]
    horizon: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// s | b
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// RBF bandwidth for kernlcb.
    #[arg(long)]
    sigma: Option<String>,
    /// Network width.
    #[arg(long)]
    m: Option<String>,
    /// Network depth.
    #[arg(long = "L")]
    depth: Option<String>,
    /// eps:<f> | adaptive:<f>
    #[arg(long)]
    collect: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Column schema for CSV bandits (file path or inline).
    #[arg(long)]
    schema: Option<String>,
    /// Comma-separated sample sizes to report.
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    n_te: Option<String>,
    /// Record wall-clock seconds in results.csv.
    #[arg(long)]
    timing: bool,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    /// Preset, then file, then environment, then flags.
    fn resolve(&self, grid: bool) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::preset(&self.preset)?;
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        config.apply_env(std::env::vars())?;
        let suffix = if grid { "_grid" } else { "" };
        let flags: [(&str, &Option<String>); 12] = [
            ("algo", &self.algo),
            ("bandit", &self.bandit),
            ("T", &self.horizon),
            ("trials", &self.trials),
            ("lambda", &self.lambda),
            ("m", &self.m),
            ("L", &self.depth),
            ("collect", &self.collect),
            ("seed", &self.seed),
            ("schema", &self.schema),
            ("n_grid", &self.n_grid),
            ("n_te", &self.n_te),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        for (key, value) in [
            ("mode", &self.mode),
            ("beta", &self.beta),
            ("eta", &self.eta),
            ("sigma", &self.sigma),
        ] {
            if let Some(v) = value {
                config.set(&format!("{key}{suffix}"), v)?;
            }
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if self.timing {
            config.timing = true;
        }
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text)
        .map_err(|e| Error::Io { path: path.clone(), source: e })?;
    Ok(path)
}

fn winners_csv(winners: &[GridWinner]) -> String {
    let mut s = String::from("algo,mode,eta,sigma,beta,search_subopt\n");
    for w in winners {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            w.algo,
            w.hyper.mode,
            w.hyper.eta,
            w.hyper.sigma,
            w.hyper.beta,
            harness::format_sig(w.subopt, 6)
        ));
    }
    s
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.resolve(false)?;
            let report = harness::run_experiment(&config)?;
            let mut paths = harness::emit_outputs(&report, &config.out)?;
            paths.push(write(config.out.join("config.txt"), &config.to_text())?);
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Grid(common) => {
            let config = common.resolve(true)?;
            let (winners, report) = harness::run_tuned(&config)?;
            let mut paths = harness::emit_outputs(&report, &config.out)?;
            paths.push(write(config.out.join("best.csv"), &winners_csv(&winners))?);
            paths.push(write(config.out.join("config.txt"), &config.to_text())?);
            for w in &winners {
                println!(
                    "{}: mode={} eta={} sigma={} beta={} (search sub-opt {})",
                    w.algo,
                    w.hyper.mode,
                    w.hyper.eta,
                    w.hyper.sigma,
                    w.hyper.beta,
                    harness::format_sig(w.subopt, 6)
                );
            }
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Ntk { common, samples } => {
            if samples == 0 {
                return Err(Error::Config("--samples must be >= 1".into()));
            }
            let config = common.resolve(false)?;
            let s = harness::ntk_diagnostics(&config, samples)?;
            let text = format!(
                "lambda0,eff_dim,nK,lambda\n{},{},{},{}\n",
                harness::format_sig(s.lambda0, 6),
                harness::format_sig(s.effective_dim, 6),
                s.nk,
                harness::format_sig(s.lambda, 6)
            );
            print!("{text}");
            if common.out.is_some() {
                std::fs::create_dir_all(&config.out)
                    .map_err(|e| Error::Io { path: config.out.clone(), source: e })?;
                write(config.out.join("ntk.csv"), &text)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
