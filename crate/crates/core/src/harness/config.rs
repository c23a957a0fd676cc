//! Experiment configuration: flat `key = value` text, environment
//! overrides, and the instance builders derived from it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::confidence::CovarianceMode;
use crate::bandits::{gaussian_blobs, BanditInstance, RewardFamily, SyntheticSpec};
use crate::data::{load_table, normalize_features, Schema};
use crate::error::{Error, Result};
use crate::nn::NetworkConfig;
use crate::policies::TrainingMode;

/// Prefix of environment variables that override config keys.
pub const ENV_PREFIX: &str = "BANDITLAB_";

/// Default uncertainty-multiplier grid.
pub const DEFAULT_BETA_GRID: [f64; 6] = [0.01, 0.05, 0.1, 1.0, 5.0, 10.0];
pub const DEFAULT_ETA_GRID: [f64; 2] = [1e-4, 1e-3];
pub const DEFAULT_SIGMA_GRID: [f64; 3] = [0.1, 1.0, 10.0];

/// Column schema of the UCI mushroom file: class letter first, then 22
/// categorical attributes.
pub const MUSHROOM_SCHEMA: &str = "label,cat*22";
/// Rows drawn for `blobs:<classes>` bandits.
/// Data file read by a bare `mushroom` bandit.
pub const DEFAULT_MUSHROOM_PATH: &str = "agaricus-lepiota.data";
pub const BLOB_ROWS: usize = 3_000;
/// Center spread of `blobs:<classes>` bandits.
pub const BLOB_SEPARATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algo {
    NeuraLcb,
    NeuralGreedy,
    LinLcb,
    KernLcb,
    NeuralLinLcb,
    NeuralLinGreedy,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::NeuraLcb,
        Algo::NeuralGreedy,
        Algo::LinLcb,
        Algo::KernLcb,
        Algo::NeuralLinLcb,
        Algo::NeuralLinGreedy,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algo::NeuraLcb => "neuralcb",
            Algo::NeuralGreedy => "neuralgreedy",
            Algo::LinLcb => "linlcb",
            Algo::KernLcb => "kernlcb",
            Algo::NeuralLinLcb => "neurallinlcb",
            Algo::NeuralLinGreedy => "neurallingreedy",
        }
    }

    /// Trained record by record; later grid points continue from earlier ones.
    pub fn is_online(self) -> bool {
        matches!(self, Algo::NeuraLcb | Algo::NeuralGreedy)
    }

    /// Acts on a confidence width, so β matters.
    pub fn is_pessimistic(self) -> bool {
        matches!(
            self,
            Algo::NeuraLcb | Algo::LinLcb | Algo::KernLcb | Algo::NeuralLinLcb
        )
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Algo::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Training regime of the neural learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    S,
    B,
}

impl Mode {
    pub fn training(self, batch_size: usize, epochs: usize) -> TrainingMode {
        match self {
            Mode::S => TrainingMode::Single,
            Mode::B => TrainingMode::Batch { batch_size, epochs },
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::S => "s",
            Mode::B => "b",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" => Ok(Mode::S),
            "b" => Ok(Mode::B),
            other => Err(Error::Config(format!("mode must be s or b, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BanditSpec {
    Synthetic(RewardFamily),
    /// UCI mushroom CSV.
    Mushroom(PathBuf),
    /// Any labelled CSV, read under the configured schema.
    Classify(PathBuf),
    /// Seeded Gaussian-blob classification problem.
    Blobs { classes: usize },
}

impl BanditSpec {
    /// Short name used for plot files.
    pub fn name(&self) -> String {
        match self {
            BanditSpec::Synthetic(f) => format!("{f:?}").to_lowercase(),
            BanditSpec::Mushroom(_) => "mushroom".into(),
            BanditSpec::Classify(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "classify".into()),
            BanditSpec::Blobs { classes } => format!("blobs{classes}"),
        }
    }
}

impl fmt::Display for BanditSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BanditSpec::Synthetic(fam) => write!(f, "{}", format!("{fam:?}").to_lowercase()),
            BanditSpec::Mushroom(p) => write!(f, "mushroom:{}", p.display()),
            BanditSpec::Classify(p) => write!(f, "classify:{}", p.display()),
            BanditSpec::Blobs { classes } => write!(f, "blobs:{classes}"),
        }
    }
}

impl FromStr for BanditSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("h1" | "h2" | "h3", None) => Ok(BanditSpec::Synthetic(head.to_ascii_lowercase().parse()?)),
            ("mushroom", Some(p)) if !p.is_empty() => Ok(BanditSpec::Mushroom(p.into())),
            ("mushroom", None) => Ok(BanditSpec::Mushroom(DEFAULT_MUSHROOM_PATH.into())),
            ("mushroom", _) => Err(Error::Config("empty path in mushroom:<path>".into())),
            ("classify", Some(p)) if !p.is_empty() => Ok(BanditSpec::Classify(p.into())),
            ("blobs", Some(k)) => {
                let classes = k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad class count in {s:?}")))?;
                Ok(BanditSpec::Blobs { classes })
            }
            _ => Err(Error::Config(format!("unknown bandit {s:?}"))),
        }
    }
}

/// Offline logging policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collect {
    EpsGreedy(f64),
    Adaptive(f64),
}

impl fmt::Display for Collect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Collect::EpsGreedy(e) => write!(f, "eps:{e}"),
            Collect::Adaptive(e) => write!(f, "adaptive:{e}"),
        }
    }
}

impl FromStr for Collect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("collect must be eps:<f> or adaptive:<f>, got {s:?}"));
        let (kind, value) = s.trim().split_once(':').ok_or_else(bad)?;
        let eps: f64 = value.parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("ε must lie in [0, 1], got {eps}")));
        }
        match kind {
            "eps" => Ok(Collect::EpsGreedy(eps)),
            "adaptive" => Ok(Collect::Adaptive(eps)),
            _ => Err(bad()),
        }
    }
}

/// One hyperparameter setting. Fields an algorithm does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub beta: f64,
    pub eta: f64,
    pub sigma: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub betas: Vec<f64>,
    pub etas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub modes: Vec<Mode>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            betas: DEFAULT_BETA_GRID.to_vec(),
            etas: DEFAULT_ETA_GRID.to_vec(),
            sigmas: DEFAULT_SIGMA_GRID.to_vec(),
            modes: vec![Mode::S, Mode::B],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub bandit: BanditSpec,
    pub algos: Vec<Algo>,
    /// Size `T` of each trial's offline log.
    pub horizon: usize,
    /// Sample sizes to report; empty means `grid_points` evenly spaced up to `T`.
    pub n_grid: Vec<usize>,
    pub grid_points: usize,
    pub trials: usize,
    pub n_te: usize,
    /// Synthetic context dimension.
    pub dim: usize,
    /// Synthetic action count.
    pub actions: usize,
    pub noise_std: f64,
    pub collect: Collect,
    pub linucb_alpha: f64,
    pub linucb_lambda: f64,
    pub depth: usize,
    pub width: usize,
    pub layer_norm: bool,
    /// Ridge / covariance regularizer.
    pub lambda: f64,
    /// Penalty weight on `‖W − W⁽⁰⁾‖²` in network training.
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub kernel_cap: usize,
    /// Covariance storage for the network-gradient learners; `None` picks
    /// full or diagonal by parameter count.
    pub covariance: Option<CovarianceMode>,
    pub hyper: Hyper,
    pub grid: HyperGrid,
    pub seed: u64,
    pub schema: Option<String>,
    pub out: PathBuf,
    /// Record wall-clock seconds in `results.csv` (breaks byte reproducibility).
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            bandit: BanditSpec::Synthetic(RewardFamily::H1),
            algos: Algo::ALL.to_vec(),
            horizon: 2_000,
            n_grid: Vec::new(),
            grid_points: 10,
            trials: 5,
            n_te: 2_000,
            dim: 10,
            actions: 5,
            noise_std: 0.1,
            collect: Collect::EpsGreedy(0.1),
            linucb_alpha: 1.0,
            linucb_lambda: 0.1,
            depth: 2,
            width: 20,
            layer_norm: false,
            lambda: 0.1,
            l2: 1e-4,
            batch_size: 50,
            epochs: 100,
            kernel_cap: crate::policies::kernel::DEFAULT_CAP,
            covariance: None,
            hyper: Hyper {
                beta: 1.0,
                eta: 1e-3,
                sigma: 1.0,
                mode: Mode::B,
            },
            grid: HyperGrid::default(),
            seed: 0,
            schema: None,
            out: PathBuf::from("out"),
            timing: false,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_num(key, v))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Full-size setting: `T = 10⁴`, `n_te = 10⁴`, 10 trials, `m = 100`,
    /// layer norm on.
    pub fn full_scale() -> Self {
        Self {
            horizon: 10_000,
            n_te: 10_000,
            trials: 10,
            width: 100,
            layer_norm: true,
            ..Self::default()
        }
    }

    /// Named starting point: `desk` or `full`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::default()),
            "full" => Ok(Self::full_scale()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    /// Sets one field by its text key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let v = value.trim();
        match key.to_ascii_lowercase().as_str() {
            "bandit" => self.bandit = v.parse()?,
            "algo" | "algos" => self.algos = parse_list(key, v)?,
            "t" | "horizon" => self.horizon = parse_num(key, v)?,
            "n_grid" => self.n_grid = parse_list(key, v)?,
            "grid_points" => self.grid_points = parse_num(key, v)?,
            "trials" => self.trials = parse_num(key, v)?,
            "n_te" => self.n_te = parse_num(key, v)?,
            "d" | "dim" => self.dim = parse_num(key, v)?,
            "k" | "actions" => self.actions = parse_num(key, v)?,
            "noise" => self.noise_std = parse_num(key, v)?,
            "collect" => self.collect = v.parse()?,
            "linucb_alpha" => self.linucb_alpha = parse_num(key, v)?,
            "linucb_lambda" => self.linucb_lambda = parse_num(key, v)?,
            "l" | "depth" => self.depth = parse_num(key, v)?,
            "m" | "width" => self.width = parse_num(key, v)?,
            "layer_norm" => self.layer_norm = parse_bool(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "l2" => self.l2 = parse_num(key, v)?,
            "batch" | "batch_size" => self.batch_size = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "kernel_cap" => self.kernel_cap = parse_num(key, v)?,
            "covariance" => {
                self.covariance = match v.to_ascii_lowercase().as_str() {
                    "auto" => None,
                    "full" => Some(CovarianceMode::Full),
                    "diagonal" => Some(CovarianceMode::Diagonal),
                    _ => return Err(Error::Config(format!("covariance must be auto, full or diagonal, got {v:?}"))),
                }
            }
            "beta" => self.hyper.beta = parse_num(key, v)?,
            "eta" => self.hyper.eta = parse_num(key, v)?,
            "sigma" => self.hyper.sigma = parse_num(key, v)?,
            "mode" => self.hyper.mode = v.parse()?,
            "beta_grid" => self.grid.betas = parse_list(key, v)?,
            "eta_grid" => self.grid.etas = parse_list(key, v)?,
            "sigma_grid" => self.grid.sigmas = parse_list(key, v)?,
            "mode_grid" => self.grid.modes = parse_list(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "schema" => self.schema = (!v.is_empty()).then(|| v.to_string()),
            "out" => self.out = PathBuf::from(v),
            "timing" => self.timing = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Applies every `BANDITLAB_<KEY>` variable in `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .collect();
        pairs.sort();
        for (k, v) in pairs {
            self.set(&k, &v)
                .map_err(|e| Error::Config(format!("{ENV_PREFIX}{}: {e}", k.to_ascii_uppercase())))?;
        }
        Ok(())
    }

    /// Serializes every key; `apply_text` on the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("bandit = {}", self.bandit),
            format!("algo = {}", join(&self.algos)),
            format!("T = {}", self.horizon),
            format!("n_grid = {}", join(&self.n_grid)),
            format!("grid_points = {}", self.grid_points),
            format!("trials = {}", self.trials),
            format!("n_te = {}", self.n_te),
            format!("d = {}", self.dim),
            format!("K = {}", self.actions),
            format!("noise = {}", self.noise_std),
            format!("collect = {}", self.collect),
            format!("linucb_alpha = {}", self.linucb_alpha),
            format!("linucb_lambda = {}", self.linucb_lambda),
            format!("L = {}", self.depth),
            format!("m = {}", self.width),
            format!("layer_norm = {}", self.layer_norm),
            format!("lambda = {}", self.lambda),
            format!("l2 = {}", self.l2),
            format!("batch = {}", self.batch_size),
            format!("epochs = {}", self.epochs),
            format!("kernel_cap = {}", self.kernel_cap),
            format!(
                "covariance = {}",
                match self.covariance {
                    None => "auto",
                    Some(CovarianceMode::Full) => "full",
                    Some(CovarianceMode::Diagonal) => "diagonal",
                }
            ),
            format!("beta = {}", self.hyper.beta),
            format!("eta = {}", self.hyper.eta),
            format!("sigma = {}", self.hyper.sigma),
            format!("mode = {}", self.hyper.mode),
            format!("beta_grid = {}", join(&self.grid.betas)),
            format!("eta_grid = {}", join(&self.grid.etas)),
            format!("sigma_grid = {}", join(&self.grid.sigmas)),
            format!("mode_grid = {}", join(&self.grid.modes)),
            format!("seed = {}", self.seed),
        ];
        if let Some(s) = &self.schema {
            lines.push(format!("schema = {s}"));
        }
        lines.push(format!("out = {}", self.out.display()));
        lines.push(format!("timing = {}", self.timing));
        lines.join("\n") + "\n"
    }

    /// The reported sample sizes, ascending.
    pub fn sample_sizes(&self) -> Vec<usize> {
        if !self.n_grid.is_empty() {
            return self.n_grid.clone();
        }
        let p = self.grid_points.max(1);
        let mut ns: Vec<usize> = (1..=p).map(|i| (i * self.horizon / p).max(1)).collect();
        ns.dedup();
        ns
    }

    pub fn network(&self, input_dim: usize) -> NetworkConfig {
        NetworkConfig::new(self.depth, self.width, input_dim).with_layer_norm(self.layer_norm)
    }

    /// Covariance mode for a learner with `params` parameters.
    pub fn covariance_mode(&self, params: usize) -> CovarianceMode {
        self.covariance.unwrap_or_else(|| CovarianceMode::auto(params))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.algos.is_empty() {
            return cfg("no algorithm selected".into());
        }
        if self.horizon == 0 {
            return cfg("T must be >= 1".into());
        }
        if self.trials == 0 {
            return cfg("trials must be >= 1".into());
        }
        if self.n_te == 0 {
            return cfg("n_te must be >= 1".into());
        }
        let ns = self.sample_sizes();
        if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
            return cfg(format!("n grid must be strictly ascending and positive, got {ns:?}"));
        }
        if *ns.last().expect("nonempty") > self.horizon {
            return cfg(format!("n grid exceeds T = {}", self.horizon));
        }
        if !(self.lambda > 0.0) || !(self.linucb_lambda > 0.0) {
            return cfg("λ must be positive".into());
        }
        if !(self.l2 >= 0.0) || !(self.noise_std >= 0.0) {
            return cfg("l2 and noise must be nonnegative".into());
        }
        if self.batch_size == 0 || self.epochs == 0 || self.kernel_cap == 0 {
            return cfg("batch, epochs and kernel_cap must be >= 1".into());
        }
        let g = &self.grid;
        if g.betas.is_empty() || g.etas.is_empty() || g.sigmas.is_empty() || g.modes.is_empty() {
            return cfg("hyperparameter grids must be nonempty".into());
        }
        let all_betas = g.betas.iter().chain([&self.hyper.beta]);
        if all_betas.clone().any(|b| !(*b >= 0.0)) {
            return cfg("β must be >= 0".into());
        }
        if g.etas.iter().chain([&self.hyper.eta]).any(|e| !(*e >= 0.0)) {
            return cfg("η must be >= 0".into());
        }
        if g.sigmas.iter().chain([&self.hyper.sigma]).any(|s| !(*s > 0.0)) {
            return cfg("σ must be positive".into());
        }
        if let BanditSpec::Synthetic(_) = self.bandit {
            if self.actions == 0 {
                return cfg("K must be >= 1".into());
            }
            if self.dim < 2 || !self.dim.is_multiple_of(2) {
                return cfg(format!("synthetic d must be even and >= 2, got {}", self.dim));
            }
        }
        if let BanditSpec::Blobs { classes } = self.bandit {
            if classes < 2 || self.dim == 0 {
                return cfg("blobs need >= 2 classes and d >= 1".into());
            }
        }
        self.network(2).validate()
    }

    /// Builds the bandit; synthetic reward parameters and blob centers are
    /// drawn from `seed`.
    pub fn build_instance(&self, seed: u64) -> Result<BanditInstance> {
        let name = self.bandit.name();
        let instance = match &self.bandit {
            BanditSpec::Synthetic(family) => {
                let spec = SyntheticSpec::new(*family, self.dim, seed)?;
                BanditInstance::synthetic(spec, self.actions, self.noise_std)?
            }
            BanditSpec::Blobs { classes } => {
                let (mut x, y) = gaussian_blobs(BLOB_ROWS, self.dim, *classes, BLOB_SEPARATION, seed);
                normalize_features(&mut x);
                pad_to_even(&mut x, *classes);
                BanditInstance::classification(&x, &y, *classes)?
            }
            BanditSpec::Classify(path) => {
                let schema = self
                    .schema
                    .as_deref()
                    .ok_or_else(|| Error::Config("classify needs a schema".into()))?;
                let table = load_table(path, &Schema::from_arg(schema)?)?;
                let classes = table.num_classes();
                let mut x = table.features;
                normalize_features(&mut x);
                pad_to_even(&mut x, classes);
                BanditInstance::classification(&x, &table.labels, classes)?
            }
            BanditSpec::Mushroom(path) => {
                let schema = Schema::from_arg(self.schema.as_deref().unwrap_or(MUSHROOM_SCHEMA))?;
                let table = load_table(path, &schema)?;
                let edible_idx = table
                    .class_names
                    .iter()
                    .position(|c| c == "e")
                    .ok_or_else(|| Error::Config("mushroom label column has no class \"e\"".into()))?;
                let edible: Vec<bool> = table.labels.iter().map(|&l| l == edible_idx).collect();
                let mut x = table.features;
                normalize_features(&mut x);
                BanditInstance::mushroom(&x, &edible)?
            }
        };
        Ok(instance.with_name(name))
    }
}

/// Appends a zero feature when `d·K` is odd, so the network input can be
/// split into two equal halves.
fn pad_to_even(rows: &mut [Vec<f64>], classes: usize) {
    let d = rows.first().map_or(0, Vec::len);
    if (d * classes) % 2 == 1 {
        for r in rows.iter_mut() {
            r.push(0.0);
        }
    }
}
