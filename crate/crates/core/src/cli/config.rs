//! Run configuration: presets, a JSON file of flat dotted keys, and
//! command-line overrides, applied in that order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::clustering::{ClusterConfig, ClusterMethod, Granularity};
use crate::data_io::output::read_to_string;
use crate::data_io::{OutputMeta, SynthConfig};
use crate::error::{Error, Result};
use crate::selector::SelectConfig;
use crate::trainer::TrainConfig;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "TASNET_CONFIG";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Loocv {
    #[default]
    None,
    /// Hold out one subject per fold.
    Subject,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblateGrid {
    pub agents: Vec<crate::agent::Variant>,
    pub rewards: Vec<crate::rewards::RewardCombo>,
    pub offsets: Vec<usize>,
}

impl Default for AblateGrid {
    fn default() -> Self {
        Self {
            agents: crate::agent::Variant::ALL.to_vec(),
            rewards: crate::rewards::RewardCombo::ALL.to_vec(),
            offsets: (5..=10).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub fragments: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub select: SelectConfig,
    pub cluster: ClusterConfig,
    pub granularity: Granularity,
    /// Cluster on fragments (`true`) or whole trials.
    pub sampling: bool,
    pub tiou: f64,
    pub loocv: Loocv,
    pub ablate: AblateGrid,
    pub paths: Paths,
}

pub const PRESETS: [&str; 2] = ["default", "toy"];

impl RunConfig {
    /// Settings of a named preset. `default` is the 30-trial synthetic
    /// benchmark with the standard training hyperparameters; `toy` is a
    /// seconds-long variant for smoke tests.
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = RunConfig {
            preset: name.to_string(),
            seed: 0,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            select: SelectConfig::default(),
            cluster: ClusterConfig::default(),
            granularity: Granularity::Trial,
            sampling: true,
            tiou: 0.5,
            loocv: Loocv::None,
            ablate: AblateGrid::default(),
            paths: Paths::default(),
        };
        match name {
            "default" => {}
            "toy" => {
                cfg.synth.trial_count = 12;
                cfg.synth.length = 48;
                cfg.synth.feature_dim = 4;
                cfg.synth.fragments_per_trial = 1;
                cfg.synth.fragment_len_range = (6, 10);
                cfg.train.agent.gcn_dim = 4;
                cfg.train.agent.gru_hidden = 8;
                cfg.train.max_epochs = 3;
                cfg.select.k = 3;
                cfg.ablate.offsets = vec![5, 8];
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(cfg)
    }

    /// Resolves a configuration: the preset (from `overrides`, else the
    /// file, else `default`), then the file's keys, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let file_map = match file {
            Some(p) => load_config_file(p)?,
            None => Map::new(),
        };
        let preset_value = overrides
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .map(|(_, v)| v.clone())
            .or_else(|| file_map.get("preset").cloned());
        let preset = match preset_value {
            Some(v) => as_string("preset", &v)?,
            None => "default".to_string(),
        };
        let mut cfg = RunConfig::preset(&preset)?;
        for (k, v) in &file_map {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        for (k, v) in overrides {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one dotted key. Unknown keys and mistyped values are rejected.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let s = &mut self.synth;
        let t = &mut self.train;
        match key {
            "preset" => self.preset = as_string(key, v)?,
            "seed" => self.seed = as_u64(key, v)?,
            "synth.trial_count" => s.trial_count = as_usize(key, v)?,
            "synth.length" => s.length = as_usize(key, v)?,
            "synth.feature_dim" => s.feature_dim = as_usize(key, v)?,
            "synth.class_count" => s.class_count = as_usize(key, v)?,
            "synth.fragments_per_trial" => s.fragments_per_trial = as_usize(key, v)?,
            "synth.fragment_len_min" => s.fragment_len_range.0 = as_usize(key, v)?,
            "synth.fragment_len_max" => s.fragment_len_range.1 = as_usize(key, v)?,
            "synth.signal_to_noise" => s.signal_to_noise = as_f64(key, v)?,
            "synth.subjects" => s.subjects = as_usize(key, v)?,
            "agent.variant" => t.agent.variant = parse(key, v)?,
            "agent.gcn_dim" => t.agent.gcn_dim = as_usize(key, v)?,
            "agent.gru_hidden" => t.agent.gru_hidden = as_usize(key, v)?,
            "agent.segment_len" => t.agent.segment_len = as_usize(key, v)?,
            "train.reward" => t.reward = parse(key, v)?,
            "train.episodes" => t.episodes = as_usize(key, v)?,
            "train.target_fraction" => t.target_fraction = as_f64(key, v)?,
            "train.balance" => t.balance = as_f64(key, v)?,
            "train.learning_rate" => t.learning_rate = as_f64(key, v)?,
            "train.weight_decay" => t.weight_decay = as_f64(key, v)?,
            "train.max_epochs" => t.max_epochs = as_usize(key, v)?,
            "train.baseline_momentum" => t.baseline_momentum = as_f64(key, v)?,
            "select.k" => self.select.k = as_usize(key, v)?,
            "select.l_max" => self.select.l_max = as_usize(key, v)?,
            "select.r_max" => self.select.r_max = as_usize(key, v)?,
            "select.nms" => self.select.nms = as_bool(key, v)?,
            "cluster.method" => self.cluster.method = parse(key, v)?,
            "cluster.k_nn" => self.cluster.k_nn = as_usize(key, v)?,
            "cluster.restarts" => self.cluster.kmeans.restarts = as_usize(key, v)?,
            "cluster.max_iterations" => self.cluster.kmeans.max_iterations = as_usize(key, v)?,
            "cluster.tolerance" => self.cluster.kmeans.tolerance = as_f64(key, v)?,
            "cluster.granularity" => self.granularity = parse(key, v)?,
            "eval.sampling" => self.sampling = as_bool(key, v)?,
            "eval.tiou" => self.tiou = as_f64(key, v)?,
            "eval.loocv" => {
                self.loocv = match as_string(key, v)?.as_str() {
                    "none" => Loocv::None,
                    "subject" => Loocv::Subject,
                    other => return Err(Error::Config(format!("eval.loocv: expected none or subject, got `{other}`"))),
                }
            }
            "ablate.agents" => self.ablate.agents = as_list(key, v, |x| parse(key, x))?,
            "ablate.rewards" => self.ablate.rewards = as_list(key, v, |x| parse(key, x))?,
            "ablate.offsets" => self.ablate.offsets = as_list(key, v, |x| as_usize(key, x))?,
            "paths.dataset" => self.paths.dataset = Some(as_string(key, v)?.into()),
            "paths.model" => self.paths.model = Some(as_string(key, v)?.into()),
            "paths.fragments" => self.paths.fragments = Some(as_string(key, v)?.into()),
            "paths.out" => self.paths.out = Some(as_string(key, v)?.into()),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.select.validate()?;
        if self.cluster.k_nn == 0 {
            return Err(Error::Config("cluster.k_nn must be >= 1".into()));
        }
        if self.cluster.kmeans.restarts == 0 || self.cluster.kmeans.max_iterations == 0 {
            return Err(Error::Config("cluster.restarts and cluster.max_iterations must be >= 1".into()));
        }
        if !(self.cluster.kmeans.tolerance >= 0.0) {
            return Err(Error::Config("cluster.tolerance must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.tiou) {
            return Err(Error::Config(format!("eval.tiou must lie in [0, 1], got {}", self.tiou)));
        }
        if self.ablate.agents.is_empty() || self.ablate.rewards.is_empty() || self.ablate.offsets.is_empty() {
            return Err(Error::Config("ablation grid axes must be non-empty".into()));
        }
        Ok(())
    }

    /// Every setting except paths, keyed as in the config file.
    pub fn to_map(&self) -> BTreeMap<String, Value> {
        let s = &self.synth;
        let t = &self.train;
        let k = &self.cluster.kmeans;
        let mut m = BTreeMap::new();
        let mut put = |key: &str, v: Value| {
            m.insert(key.to_string(), v);
        };
        put("preset", self.preset.clone().into());
        put("seed", self.seed.into());
        put("synth.trial_count", s.trial_count.into());
        put("synth.length", s.length.into());
        put("synth.feature_dim", s.feature_dim.into());
        put("synth.class_count", s.class_count.into());
        put("synth.fragments_per_trial", s.fragments_per_trial.into());
        put("synth.fragment_len_min", s.fragment_len_range.0.into());
        put("synth.fragment_len_max", s.fragment_len_range.1.into());
        put("synth.signal_to_noise", s.signal_to_noise.into());
        put("synth.subjects", s.subjects.into());
        put("agent.variant", t.agent.variant.code().into());
        put("agent.gcn_dim", t.agent.gcn_dim.into());
        put("agent.gru_hidden", t.agent.gru_hidden.into());
        put("agent.segment_len", t.agent.segment_len.into());
        put("train.reward", t.reward.code().into());
        put("train.episodes", t.episodes.into());
        put("train.target_fraction", t.target_fraction.into());
        put("train.balance", t.balance.into());
        put("train.learning_rate", t.learning_rate.into());
        put("train.weight_decay", t.weight_decay.into());
        put("train.max_epochs", t.max_epochs.into());
        put("train.baseline_momentum", t.baseline_momentum.into());
        put("select.k", self.select.k.into());
        put("select.l_max", self.select.l_max.into());
        put("select.r_max", self.select.r_max.into());
        put("select.nms", self.select.nms.into());
        put("cluster.method", self.cluster.method.code().into());
        put("cluster.k_nn", self.cluster.k_nn.into());
        put("cluster.restarts", k.restarts.into());
        put("cluster.max_iterations", k.max_iterations.into());
        put("cluster.tolerance", k.tolerance.into());
        put("cluster.granularity", self.granularity.to_string().into());
        put("eval.sampling", self.sampling.into());
        put("eval.tiou", self.tiou.into());
        put(
            "eval.loocv",
            match self.loocv {
                Loocv::None => "none",
                Loocv::Subject => "subject",
            }
            .into(),
        );
        put("ablate.agents", self.ablate.agents.iter().map(|a| a.code()).collect::<Vec<_>>().into());
        put("ablate.rewards", self.ablate.rewards.iter().map(|r| r.code()).collect::<Vec<_>>().into());
        put("ablate.offsets", self.ablate.offsets.clone().into());
        m
    }

    /// SHA-256 of the canonical JSON of [`RunConfig::to_map`], hex encoded.
    /// Paths are excluded so that relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_map()).expect("config map serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn meta(&self) -> OutputMeta {
        OutputMeta::new(self.hash(), self.seed)
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn method(&self) -> ClusterMethod {
        self.cluster.method
    }
}

fn load_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(Error::Config(format!(
            "{}: expected a JSON object of dotted keys",
            path.display()
        ))),
    }
}

/// Parses `key=value`; the value is read as JSON when possible, else as a
/// bare string.
pub fn parse_override(arg: &str) -> Result<(String, Value)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{arg}` is not of the form key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn type_error(key: &str, expected: &str, v: &Value) -> Error {
    Error::Config(format!("{key}: expected {expected}, got {v}"))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
    .ok_or_else(|| type_error(key, "a non-negative integer", v))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    as_u64(key, v).and_then(|x| usize::try_from(x).map_err(|_| type_error(key, "a smaller integer", v)))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
    .filter(|x| x.is_finite())
    .ok_or_else(|| type_error(key, "a finite number", v))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.as_str() {
            "on" | "true" => Some(true),
            "off" | "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
    .ok_or_else(|| type_error(key, "on/off or a boolean", v))
}

fn as_string(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        _ => Err(type_error(key, "a string", v)),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(key: &str, v: &Value) -> Result<T> {
    as_string(key, v)?
        .parse()
        .map_err(|e: Error| Error::Config(format!("{key}: {e}")))
}

/// A JSON array, or a comma-separated string.
fn as_list<T>(key: &str, v: &Value, item: impl Fn(&Value) -> Result<T>) -> Result<Vec<T>> {
    match v {
        Value::Array(items) => items.iter().map(item).collect(),
        Value::String(s) => s
            .split(',')
            .map(|p| item(&Value::String(p.trim().to_string())))
            .collect(),
        _ => Err(type_error(key, "a list", v)),
    }
}
