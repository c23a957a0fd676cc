//! Offline logs: behavior-policy collection, the binary dataset format,
//! CSV table ingestion, and the single-policy concentration coefficient.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandits::{unit_sphere_transform, BanditInstance, FullContext};
use crate::error::{check_dim, Error, Result};
use crate::policies::linucb::LinUcb;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub context: FullContext,
    pub action: usize,
    pub reward: f64,
}

impl Record {
    /// Feature vector of the logged action.
    pub fn chosen(&self) -> &[f64] {
        self.context.arm(self.action)
    }
}

/// How the log was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    /// Uniform exploration with probability ε, otherwise the optimal action.
    EpsGreedy { eps: f64 },
    /// Optimal action with probability 1−ε, otherwise LinUCB on the history.
    Adaptive { eps: f64, alpha: f64, lambda: f64 },
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineDataset {
    dim: usize,
    actions: usize,
    behavior: Behavior,
    seed: Option<u64>,
    records: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    d: usize,
    #[serde(rename = "K")]
    k: usize,
    n: usize,
    behavior: Behavior,
    seed: Option<u64>,
}

const FORMAT_TAG: &str = "banditlab-dataset-v1";

impl OfflineDataset {
    pub fn new(dim: usize, actions: usize, behavior: Behavior, seed: Option<u64>) -> Self {
        Self {
            dim,
            actions,
            behavior,
            seed,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        check_dim(self.dim, record.context.dim())?;
        check_dim(self.actions, record.context.num_actions())?;
        if record.action >= self.actions {
            return Err(Error::LabelOutOfRange {
                label: record.action,
                classes: self.actions,
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// First `n` records (the data available at sample size `n`).
    pub fn prefix(&self, n: usize) -> &[Record] {
        &self.records[..n.min(self.records.len())]
    }

    /// Binary layout: one JSON header line, then per record `K·d` features as
    /// little-endian `f64`, the action as little-endian `u32`, the reward as
    /// little-endian `f64`, and a `\n` terminator byte.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = Header {
            format: FORMAT_TAG.into(),
            d: self.dim,
            k: self.actions,
            n: self.records.len(),
            behavior: self.behavior,
            seed: self.seed,
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for rec in &self.records {
            for v in rec.context.as_flat() {
                out.write_all(&v.to_le_bytes())?;
            }
            out.write_all(&(rec.action as u32).to_le_bytes())?;
            out.write_all(&rec.reward.to_le_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader
            .read_line(&mut line)
            .map_err(|e| Error::Config(format!("dataset header: {e}")))?;
        let header: Header = serde_json::from_str(line.trim_end())?;
        if header.format != FORMAT_TAG {
            return Err(Error::Config(format!("unknown dataset format {:?}", header.format)));
        }
        let mut data = Self::new(header.d, header.k, header.behavior, header.seed);
        let width = header.k * header.d;
        let mut f8 = [0u8; 8];
        let mut f4 = [0u8; 4];
        let truncated = |i: usize| Error::Config(format!("dataset truncated at record {i}"));
        for i in 0..header.n {
            let mut features = Vec::with_capacity(width);
            for _ in 0..width {
                reader.read_exact(&mut f8).map_err(|_| truncated(i))?;
                features.push(f64::from_le_bytes(f8));
            }
            reader.read_exact(&mut f4).map_err(|_| truncated(i))?;
            let action = u32::from_le_bytes(f4) as usize;
            reader.read_exact(&mut f8).map_err(|_| truncated(i))?;
            let reward = f64::from_le_bytes(f8);
            let mut nl = [0u8; 1];
            reader.read_exact(&mut nl).map_err(|_| truncated(i))?;
            if nl[0] != b'\n' {
                return Err(Error::Config(format!("record {i} is not newline-terminated")));
            }
            data.push(Record {
                context: FullContext::from_flat(header.k, header.d, features)?,
                action,
                reward,
            })?;
        }
        Ok(data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::Config(format!("ε must lie in [0, 1], got {eps}")))
    }
}

/// Logs `n` rounds of the stationary ε-greedy policy with respect to the
/// true mean reward. Exploration is uniform over all `K` actions.
pub fn collect_eps_greedy(
    instance: &BanditInstance,
    n: usize,
    eps: f64,
    seed: u64,
) -> Result<OfflineDataset> {
    check_eps(eps)?;
    let k = instance.num_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = OfflineDataset::new(instance.dim(), k, Behavior::EpsGreedy { eps }, Some(seed));
    for _ in 0..n {
        let round = instance.sample_round(&mut rng);
        let action = if rng.random::<f64>() < eps {
            rng.random_range(0..k)
        } else {
            round.optimal_action()
        };
        let reward = instance.sample_reward(&round, action, &mut rng);
        data.push(Record {
            context: round.context,
            action,
            reward,
        })?;
    }
    Ok(data)
}

/// Logs `n` rounds of the history-dependent mixture: the optimal action
/// with probability `1 − ε`, otherwise the LinUCB action fitted on all
/// records logged so far. LinUCB absorbs every logged record.
pub fn collect_adaptive(
    instance: &BanditInstance,
    n: usize,
    eps: f64,
    seed: u64,
    alpha: f64,
    lambda: f64,
) -> Result<OfflineDataset> {
    check_eps(eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = LinUcb::new(instance.dim(), lambda, alpha)?;
    let mut data = OfflineDataset::new(
        instance.dim(),
        instance.num_actions(),
        Behavior::Adaptive { eps, alpha, lambda },
        Some(seed),
    );
    for _ in 0..n {
        let round = instance.sample_round(&mut rng);
        let action = if rng.random::<f64>() < 1.0 - eps {
            round.optimal_action()
        } else {
            learner.act(&round.context)?
        };
        let reward = instance.sample_reward(&round, action, &mut rng);
        learner.update(round.context.arm(action), reward)?;
        data.push(Record {
            context: round.context,
            action,
            reward,
        })?;
    }
    Ok(data)
}

/// Bound on `‖π*(·|x)/μ(·|history, x)‖∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Exact(f64),
    UpperBound(f64),
    Unknown,
}

impl Kappa {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Kappa::Exact(v) | Kappa::UpperBound(v) => Some(v),
            Kappa::Unknown => None,
        }
    }
}

/// ε-greedy: `1/(1 − ε + ε/K)`; adaptive mixture: at most `1/(1 − ε)`.
pub fn compute_kappa(behavior: Behavior, actions: usize) -> Kappa {
    match behavior {
        Behavior::EpsGreedy { eps } if actions > 0 => {
            Kappa::Exact(1.0 / (1.0 - eps + eps / actions as f64))
        }
        Behavior::Adaptive { eps, .. } if eps < 1.0 => Kappa::UpperBound(1.0 / (1.0 - eps)),
        _ => Kappa::Unknown,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    /// One-hot encoded; `None` infers the category set from the file.
    Categorical(Option<Vec<String>>),
    /// Target column; `None` infers the class set from the file.
    Label(Option<Vec<String>>),
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<ColumnKind>,
    pub has_header: bool,
}

impl std::str::FromStr for Schema {
    type Err = Error;

    /// Comma-separated column kinds: `num`, `cat`, `cat:a|b`, `label`,
    /// `label:x|y`, `skip`, each optionally repeated with `*N`. A leading
    /// `header;` marks the CSV as having a header row.
    fn from_str(s: &str) -> Result<Self> {
        let (has_header, body) = match s.trim().strip_prefix("header;") {
            Some(rest) => (true, rest),
            None => (false, s.trim()),
        };
        let mut columns = Vec::new();
        for token in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (kind, repeat) = match token.rsplit_once('*') {
                Some((k, r)) => (
                    k,
                    r.parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad repeat count in {token:?}")))?,
                ),
                None => (token, 1),
            };
            let (name, values) = match kind.split_once(':') {
                Some((n, v)) => (n, Some(v.split('|').map(str::to_string).collect::<Vec<_>>())),
                None => (kind, None),
            };
            let col = match name {
                "num" => ColumnKind::Numeric,
                "cat" => ColumnKind::Categorical(values),
                "label" => ColumnKind::Label(values),
                "skip" => ColumnKind::Skip,
                other => return Err(Error::Config(format!("unknown column kind {other:?}"))),
            };
            columns.extend(std::iter::repeat_n(col, repeat));
        }
        let labels = columns
            .iter()
            .filter(|c| matches!(c, ColumnKind::Label(_)))
            .count();
        if labels != 1 {
            return Err(Error::Config(format!("schema needs exactly one label column, got {labels}")));
        }
        Ok(Schema {
            columns,
            has_header,
        })
    }
}

impl Schema {
    /// Reads a schema from a file, or parses the argument itself when no
    /// such file exists.
    pub fn from_arg(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let joined = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(",");
            joined.replace("header;,", "header;").parse()
        } else {
            arg.parse()
        }
    }
}

/// Encoded feature matrix and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl RawTable {
    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Published size of a reference dataset: context dimension, classes, rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetStats {
    pub name: &'static str,
    pub dim: usize,
    pub classes: usize,
    pub instances: usize,
}

pub const REFERENCE_DATASETS: [DatasetStats; 4] = [
    DatasetStats { name: "mushroom", dim: 22, classes: 2, instances: 8_124 },
    DatasetStats { name: "statlog", dim: 9, classes: 7, instances: 43_500 },
    DatasetStats { name: "adult", dim: 94, classes: 14, instances: 45_222 },
    DatasetStats { name: "mnist", dim: 784, classes: 10, instances: 70_000 },
];

pub fn reference_stats(name: &str) -> Option<DatasetStats> {
    REFERENCE_DATASETS.iter().copied().find(|s| s.name == name)
}

fn sorted_categories(values: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = values.into_iter().collect();
    if v.iter().all(|s| s.parse::<f64>().is_ok()) {
        v.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    v
}

/// Parses a comma-separated table under `schema`: numeric columns as reals,
/// categorical columns one-hot encoded, the label column mapped to `0..K`.
pub fn load_table(path: &Path, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, path, schema)
}

pub fn read_table<R: Read>(input: R, path: &Path, schema: &Schema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let width = schema.columns.len();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Resolve inferred category sets.
    let levels: Vec<Option<Vec<String>>> = schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, col)| match col {
            ColumnKind::Categorical(Some(v)) | ColumnKind::Label(Some(v)) => Some(v.clone()),
            ColumnKind::Categorical(None) | ColumnKind::Label(None) => Some(sorted_categories(
                rows.iter().map(|(_, r)| r[j].clone()).collect(),
            )),
            _ => None,
        })
        .collect();

    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    let mut class_names = Vec::new();
    for (line, row) in &rows {
        let mut x = Vec::new();
        for (j, (col, value)) in schema.columns.iter().zip(row).enumerate() {
            match col {
                ColumnKind::Skip => {}
                ColumnKind::Numeric => {
                    let v: f64 = value.parse().map_err(|_| {
                        parse_err(*line, format!("column {}: {value:?} is not a number", j + 1))
                    })?;
                    x.push(v);
                }
                ColumnKind::Categorical(_) | ColumnKind::Label(_) => {
                    let lv = levels[j].as_ref().expect("resolved above");
                    let idx = lv.iter().position(|c| c == value).ok_or_else(|| {
                        parse_err(*line, format!("column {}: unknown category {value:?}", j + 1))
                    })?;
                    if matches!(col, ColumnKind::Label(_)) {
                        labels.push(idx);
                        class_names.clone_from(lv);
                    } else {
                        x.extend((0..lv.len()).map(|c| (c == idx) as u8 as f64));
                    }
                }
            }
        }
        features.push(x);
    }
    Ok(RawTable {
        features,
        labels,
        class_names,
    })
}

/// Min-max scales every feature to `[0, 1]`, then L2-normalizes each row.
/// Constant features map to 0; rows that end up all-zero are left as is.
pub fn normalize_features(rows: &mut [Vec<f64>]) {
    let Some(d) = rows.first().map(Vec::len) else {
        return;
    };
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in rows.iter() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    for row in rows.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let span = hi[j] - lo[j];
            *v = if span > 0.0 { (*v - lo[j]) / span } else { 0.0 };
        }
        if let Ok(u) = unit_sphere_transform(row) {
            *row = u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandits::{RewardFamily, SyntheticSpec};

    fn small_bandit(k: usize) -> BanditInstance {
        let spec = SyntheticSpec::new(RewardFamily::H1, 4, 0).unwrap();
        BanditInstance::synthetic(spec, k, 0.1).unwrap()
    }

    #[test]
    fn greedy_logging_has_no_regret() {
        let b = small_bandit(5);
        let spec = match &b.kind {
            crate::bandits::BanditKind::Synthetic(s) => s.clone(),
            _ => unreachable!(),
        };
        let data = collect_eps_greedy(&b, 300, 0.0, 1).unwrap();
        for rec in data.records() {
            let h: Vec<f64> = rec.context.arms().map(|x| spec.reward(x).unwrap()).collect();
            assert_eq!(rec.action, crate::bandits::argmax(&h));
        }
    }

    #[test]
    fn noiseless_rewards_equal_means() {
        let bandit = BanditInstance::classification(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
            &[0, 1, 2],
            3,
        )
        .unwrap();
        let data = collect_eps_greedy(&bandit, 200, 0.5, 2).unwrap();
        for rec in data.records() {
            let x = rec.chosen();
            // The block holding the row identifies the action; reward is 0 or 1.
            assert!(x.iter().any(|&v| v != 0.0));
            assert!(rec.reward == 0.0 || rec.reward == 1.0);
        }
    }

    #[test]
    fn collection_is_replayable() {
        let b = small_bandit(3);
        let a = collect_eps_greedy(&b, 50, 0.3, 9).unwrap();
        let c = collect_eps_greedy(&b, 50, 0.3, 9).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_to(&mut x).unwrap();
        c.write_to(&mut y).unwrap();
        assert_eq!(x, y);
        assert!(collect_eps_greedy(&b, 5, 1.5, 0).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let b = small_bandit(3);
        let data = collect_adaptive(&b, 40, 0.5, 4, 1.0, 0.1).unwrap();
        let mut buf = Vec::new();
        data.write_to(&mut buf).unwrap();
        let header_len = buf.iter().position(|&c| c == b'\n').unwrap() + 1;
        assert_eq!(buf.len() - header_len, 40 * (3 * 4 * 8 + 4 + 8 + 1));
        let back = OfflineDataset::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, data);
        assert!(OfflineDataset::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn adaptive_with_zero_eps_logs_optimal_actions() {
        let b = small_bandit(4);
        let data = collect_adaptive(&b, 100, 0.0, 3, 1.0, 0.1).unwrap();
        let greedy = collect_eps_greedy(&b, 100, 0.0, 3).unwrap();
        let a: Vec<usize> = data.records().iter().map(|r| r.action).collect();
        let g: Vec<usize> = greedy.records().iter().map(|r| r.action).collect();
        assert_eq!(a, g);
    }

    #[test]
    fn kappa_closed_forms() {
        let k = compute_kappa(Behavior::EpsGreedy { eps: 0.1 }, 30).value().unwrap();
        assert!((k - 1.0 / (0.9 + 0.1 / 30.0)).abs() < 1e-15);
        assert!((k - 1.107_01).abs() < 1e-5);
        assert_eq!(compute_kappa(Behavior::EpsGreedy { eps: 0.0 }, 5), Kappa::Exact(1.0));
        match compute_kappa(Behavior::Adaptive { eps: 0.9, alpha: 1.0, lambda: 0.1 }, 5) {
            Kappa::UpperBound(v) => assert!((v - 10.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(compute_kappa(Behavior::External, 5), Kappa::Unknown);
    }

    #[test]
    fn toy_table_encoding() {
        let csv = "1.5,a,x\n2.0,b,y\n-1,a,x\n";
        let schema: Schema = "num,cat:a|b,label".parse().unwrap();
        let t = read_table(csv.as_bytes(), Path::new("toy.csv"), &schema).unwrap();
        assert_eq!(t.features, vec![vec![1.5, 1.0, 0.0], vec![2.0, 0.0, 1.0], vec![-1.0, 1.0, 0.0]]);
        assert_eq!(t.labels, vec![0, 1, 0]);
        assert_eq!(t.num_classes(), 2);
    }

    #[test]
    fn table_errors_carry_line_numbers() {
        let schema: Schema = "num,cat:a|b,label".parse().unwrap();
        let err = read_table("1,a,x\n2,c,y\n".as_bytes(), Path::new("t.csv"), &schema).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_table("1,a,x\nq,a,y\n".as_bytes(), Path::new("t.csv"), &schema).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_table("1,a\n".as_bytes(), Path::new("t.csv"), &schema).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn schema_parsing() {
        let s: Schema = "header;num*3,skip,label".parse().unwrap();
        assert!(s.has_header);
        assert_eq!(s.columns.len(), 5);
        assert!("num,num".parse::<Schema>().is_err());
        assert!("num,bogus,label".parse::<Schema>().is_err());
    }

    #[test]
    fn inferred_numeric_labels_sort_numerically() {
        let schema: Schema = "num,label".parse().unwrap();
        let t = read_table("0,10\n1,2\n2,1\n".as_bytes(), Path::new("t"), &schema).unwrap();
        assert_eq!(t.class_names, vec!["1", "2", "10"]);
        assert_eq!(t.labels, vec![2, 1, 0]);
    }

    #[test]
    fn normalization_gives_unit_rows() {
        let mut rows = vec![vec![1.0, 10.0], vec![3.0, 20.0], vec![2.0, 10.0]];
        normalize_features(&mut rows);
        assert_eq!(rows[0], vec![0.0, 0.0]);
        assert!((crate::scalar::norm2(&rows[1]) - 1.0).abs() < 1e-15);
        assert_eq!(rows[2], vec![1.0, 0.0]);
    }
}
