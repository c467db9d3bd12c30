//! Experiment configuration.
//!
//! Line-oriented `key = value` text with dotted keys. `#` starts a comment,
//! blank lines are ignored, a key may appear once. Lists are comma
//! separated. See the README for the full key table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::aggregation::AggregationRule;
use crate::data::{DatasetFormat, FastDraw, SamplerMode, SyntheticSpec};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::simclock::CostModel;
use crate::workers::{measure_alpha, ScheduleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SyncSgd,
    BalancedLocal,
    UnbalancedUnbiased,
    BiasedLocal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::SyncSgd, Algorithm::BalancedLocal, Algorithm::UnbalancedUnbiased, Algorithm::BiasedLocal];
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync_sgd" => Ok(Algorithm::SyncSgd),
            "balanced_local" => Ok(Algorithm::BalancedLocal),
            "unbalanced_unbiased" => Ok(Algorithm::UnbalancedUnbiased),
            "biased_local" => Ok(Algorithm::BiasedLocal),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::SyncSgd => "sync_sgd",
            Algorithm::BalancedLocal => "balanced_local",
            Algorithm::UnbalancedUnbiased => "unbalanced_unbiased",
            Algorithm::BiasedLocal => "biased_local",
        })
    }
}

/// How never-seen samples are treated by loss-biased selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnseenPolicy {
    /// Unseen samples rank above every observed loss.
    #[default]
    Priority,
    /// Round 0 samples uniformly; afterwards unseen samples rank last.
    UniformFirstRound,
}

impl FromStr for UnseenPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "priority" => Ok(UnseenPolicy::Priority),
            "uniform_first_round" => Ok(UnseenPolicy::UniformFirstRound),
            other => Err(Error::Config(format!("unknown unseen policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec, seed: u64 },
    File { path: PathBuf, format: DatasetFormat, num_classes: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Rounds(usize),
    Epochs(usize),
    /// Local updates per fast worker; converted with the algorithm's fast τ.
    FastUpdates(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilestoneUnit {
    Round,
    Epoch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub base_lr: f64,
    pub milestones: Vec<usize>,
    pub decay: f64,
    pub milestone_unit: MilestoneUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub input_dim: Option<usize>,
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub tau_f: usize,
    pub p_slow: usize,
    pub p_fast: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    pub fast_draw: FastDraw,
    pub unseen: UnseenPolicy,
}

/// A parsed and checked experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    raw: BTreeMap<String, String>,
    base_dir: PathBuf,
    pub name: String,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub data: DataSource,
    pub val_fraction: f64,
    pub model: ModelConfig,
    pub profile: ProfileConfig,
    pub sampler: SamplerConfig,
    pub aggregation: AggregationRule,
    pub schedule: ScheduleConfig,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub budget: Budget,
    pub cost: CostModel,
    pub output: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "algorithm",
    "seeds",
    "data.source",
    "data.path",
    "data.format",
    "data.num_classes",
    "data.val_fraction",
    "synthetic.n",
    "synthetic.input_dim",
    "synthetic.num_classes",
    "synthetic.separation",
    "synthetic.std",
    "synthetic.means",
    "synthetic.label_noise",
    "synthetic.seed",
    "model.kind",
    "model.hidden_dim",
    "model.input_dim",
    "model.num_classes",
    "profile.alpha",
    "profile.lambda",
    "profile.tau_f",
    "profile.p_slow",
    "profile.p_fast",
    "sampler.mode",
    "sampler.fast_draw",
    "sampler.unseen",
    "aggregation",
    "schedule.kind",
    "schedule.base_lr",
    "schedule.milestones",
    "schedule.decay",
    "schedule.milestone_unit",
    "train.batch_size",
    "train.weight_decay",
    "budget.rounds",
    "budget.epochs",
    "budget.fast_updates",
    "cost.fast_iter_s",
    "cost.slow_iter_s",
    "cost.agg_s",
    "output.path",
];

/// Splits config text into a key → value map.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected `key = value`, found `{line}`") })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Parse { line: line_no, msg: "empty key".into() });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Parse { line: line_no, msg: format!("unknown key `{key}`") });
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Parse { line: line_no, msg: format!("duplicate key `{key}`") });
        }
    }
    Ok(map)
}

struct Fields<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Fields<'_> {
    fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => parse_list(v).map(Some).ok_or_else(|| Error::Config(format!("`{key}`: bad list `{v}`"))),
        }
    }
}

/// Comma-separated list; empty items are an error.
pub fn parse_list<T: FromStr>(text: &str) -> Option<Vec<T>> {
    text.split(',').map(|s| s.trim().parse::<T>().ok()).collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut map = parse_pairs(&text)?;
        if !map.contains_key("name") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                map.insert("name".into(), stem.to_string());
            }
        }
        Self::from_map(map, base)
    }

    /// Parses config text; relative data paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_map(parse_pairs(text)?, base_dir.to_path_buf())
    }

    /// Copy with one key replaced (or added), re-validated.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        self.edit(&[(key, Some(value))])
    }

    /// Copy with a key removed, re-validated.
    pub fn without(&self, key: &str) -> Result<Self> {
        self.edit(&[(key, None)])
    }

    /// Applies several sets (`Some`) and removals (`None`) in order, then
    /// validates once, so that edits which are only valid together work.
    pub fn edit(&self, edits: &[(&str, Option<&str>)]) -> Result<Self> {
        let mut map = self.raw.clone();
        for (key, value) in edits {
            if !KNOWN_KEYS.contains(key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
            match value {
                Some(v) => map.insert(key.to_string(), v.to_string()),
                None => map.remove(*key),
            };
        }
        Self::from_map(map, self.base_dir.clone())
    }

    /// The same experiment under another algorithm, with that algorithm's
    /// default sampler and aggregation rule.
    pub fn for_algorithm(&self, algorithm: Algorithm) -> Result<Self> {
        let name = algorithm.to_string();
        self.edit(&[("sampler.mode", None), ("aggregation", None), ("algorithm", Some(&name))])
    }

    /// Sorted `key = value` lines; the input of [`config_hash`](Self::config_hash).
    pub fn canonical_text(&self) -> String {
        self.raw.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of SHA-256 over the canonical text.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(String::as_str)
    }

    fn from_map(raw: BTreeMap<String, String>, base_dir: PathBuf) -> Result<Self> {
        let f = Fields { map: &raw };
        let algorithm: Algorithm = f
            .get("algorithm")?
            .ok_or_else(|| Error::Config("`algorithm` is required".into()))?;
        let name = f.str("name").unwrap_or("experiment").to_string();
        let seeds: Vec<u64> = f.list("seeds")?.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }

        let data = match f.str("data.source").unwrap_or("synthetic") {
            "synthetic" => {
                let defaults = SyntheticSpec::default();
                let input_dim = f.or("synthetic.input_dim", defaults.input_dim)?;
                let means = match f.str("synthetic.means") {
                    None => None,
                    Some(text) => Some(
                        text.split(';')
                            .map(parse_list::<f64>)
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| Error::Config(format!("`synthetic.means`: bad value `{text}`")))?,
                    ),
                };
                let spec = SyntheticSpec {
                    n: f.or("synthetic.n", defaults.n)?,
                    input_dim,
                    num_classes: f.or("synthetic.num_classes", defaults.num_classes)?,
                    separation: f.or("synthetic.separation", defaults.separation)?,
                    std: f.list("synthetic.std")?.unwrap_or(defaults.std),
                    means,
                    label_noise: f.or("synthetic.label_noise", defaults.label_noise)?,
                };
                spec.validate()?;
                DataSource::Synthetic { spec, seed: f.or("synthetic.seed", 0)? }
            }
            "file" => {
                let path = f
                    .str("data.path")
                    .ok_or_else(|| Error::Config("`data.path` is required for file data".into()))?;
                let path = PathBuf::from(path);
                let path = if path.is_relative() { base_dir.join(path) } else { path };
                DataSource::File {
                    path,
                    format: f.or("data.format", DatasetFormat::Csv)?,
                    num_classes: f.get("data.num_classes")?,
                }
            }
            other => return Err(Error::Config(format!("unknown data.source `{other}`"))),
        };
        let val_fraction: f64 = f.or("data.val_fraction", 0.2)?;
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::Config("data.val_fraction must lie in (0, 1)".into()));
        }

        let model = ModelConfig {
            kind: f.or("model.kind", ModelKind::LogisticRegression)?,
            hidden_dim: f.or("model.hidden_dim", 16)?,
            input_dim: f.get("model.input_dim")?,
            num_classes: f.get("model.num_classes")?,
        };
        if model.kind == ModelKind::Mlp2 && model.hidden_dim == 0 {
            return Err(Error::Config("model.hidden_dim must be at least 1".into()));
        }

        let fast_iter_s: f64 = f.or("cost.fast_iter_s", 1.0)?;
        let explicit_alpha: Option<f64> = f.get("profile.alpha")?;
        let slow_iter_s: f64 = match (f.get("cost.slow_iter_s")?, explicit_alpha) {
            (Some(s), _) => s,
            (None, Some(a)) => a * fast_iter_s,
            (None, None) => {
                return Err(Error::Config("set `profile.alpha` or `cost.slow_iter_s`".into()));
            }
        };
        let cost = CostModel::new(fast_iter_s, slow_iter_s, f.or("cost.agg_s", 0.0)?)
            .map_err(|e| Error::Config(e.to_string()))?;
        let alpha = match explicit_alpha {
            Some(a) => a,
            None => measure_alpha(&[fast_iter_s], &[slow_iter_s])?,
        };
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("profile.alpha must be ≥ 1, got {alpha}")));
        }
        let profile = ProfileConfig {
            alpha,
            lambda: f.or("profile.lambda", 2.0)?,
            tau_f: f.or("profile.tau_f", 32)?,
            p_slow: f.or("profile.p_slow", 1)?,
            p_fast: f.or("profile.p_fast", 1)?,
        };
        if profile.tau_f == 0 || profile.p_slow == 0 {
            return Err(Error::Config("profile.tau_f and profile.p_slow must be at least 1".into()));
        }

        let default_mode = match algorithm {
            Algorithm::BiasedLocal => SamplerMode::Separated,
            _ => SamplerMode::Uniform,
        };
        let sampler = SamplerConfig {
            mode: f.or("sampler.mode", default_mode)?,
            fast_draw: f.or("sampler.fast_draw", FastDraw::Fresh)?,
            unseen: f.or("sampler.unseen", UnseenPolicy::Priority)?,
        };
        let default_rule = match algorithm {
            Algorithm::BiasedLocal => AggregationRule::TauWeighted,
            _ => AggregationRule::Balanced,
        };
        let aggregation = f.or("aggregation", default_rule)?;

        match algorithm {
            Algorithm::BiasedLocal => {
                if sampler.mode == SamplerMode::Uniform {
                    return Err(Error::Config("biased_local needs sampler.mode separated or unified".into()));
                }
                if !(profile.lambda >= 1.0 && profile.lambda.is_finite()) {
                    return Err(Error::Config("profile.lambda must be ≥ 1".into()));
                }
            }
            Algorithm::SyncSgd if aggregation != AggregationRule::Balanced => {
                return Err(Error::Config("sync_sgd always aggregates with balanced averaging".into()));
            }
            _ => {
                if sampler.mode != SamplerMode::Uniform {
                    return Err(Error::Config(format!("{algorithm} needs sampler.mode uniform")));
                }
            }
        }
        if sampler.fast_draw == FastDraw::Epoch && sampler.mode == SamplerMode::Unified {
            return Err(Error::Config("sampler.fast_draw = epoch cannot be combined with unified sampling".into()));
        }

        let schedule = ScheduleConfig {
            kind: f.or("schedule.kind", ScheduleKind::Constant)?,
            base_lr: f.or("schedule.base_lr", 0.1)?,
            milestones: f.list("schedule.milestones")?.unwrap_or_default(),
            decay: f.or("schedule.decay", 0.1)?,
            milestone_unit: match f.str("schedule.milestone_unit").unwrap_or("round") {
                "round" => MilestoneUnit::Round,
                "epoch" => MilestoneUnit::Epoch,
                other => return Err(Error::Config(format!("unknown schedule.milestone_unit `{other}`"))),
            },
        };
        if !(schedule.base_lr > 0.0 && schedule.base_lr.is_finite()) {
            return Err(Error::Config("schedule.base_lr must be positive".into()));
        }
        if schedule.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("schedule.milestones must be strictly increasing".into()));
        }

        let batch_size = f.or("train.batch_size", 32)?;
        if batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        let weight_decay: f64 = f.or("train.weight_decay", 0.0)?;
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::Config("train.weight_decay must be nonnegative".into()));
        }

        let budgets = [
            f.get("budget.rounds")?.map(Budget::Rounds),
            f.get("budget.epochs")?.map(Budget::Epochs),
            f.get("budget.fast_updates")?.map(Budget::FastUpdates),
        ];
        let mut set = budgets.into_iter().flatten();
        let budget = match (set.next(), set.next()) {
            (Some(b), None) => b,
            (None, _) => return Err(Error::Config("set one of budget.rounds, budget.epochs, budget.fast_updates".into())),
            (Some(_), Some(_)) => return Err(Error::Config("only one budget.* key may be set".into())),
        };
        if matches!(budget, Budget::Rounds(0) | Budget::Epochs(0) | Budget::FastUpdates(0)) {
            return Err(Error::Config("budget must be positive".into()));
        }

        let output = f.str("output.path").map(|p| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        });

        Ok(Self {
            raw,
            base_dir,
            name,
            algorithm,
            seeds,
            data,
            val_fraction,
            model,
            profile,
            sampler,
            aggregation,
            schedule,
            batch_size,
            weight_decay,
            budget,
            cost,
            output,
        })
    }
}
