//! Plain-text `key = value` configuration with dotted sections.
//!
//! ```text
//! seed = 7
//! paths.cube = scene.hdr
//! [cluster]
//! grid = 8        # same as cluster.grid = 8
//! ```
//!
//! A `[section]` line prefixes the keys that follow it. Later assignments
//! win, so command-line overrides are applied after the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classifier::{ModelConfig, TrainConfig};
use crate::cluster::ClusterConfig;
use crate::error::{invalid, Error, Result};
use crate::features::ProviderConfig;
use crate::labels::LabelMode;

use super::stage1::{parse_terms, Stage1Config};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            map.entries.insert(key, v.trim().to_string());
        }
        Ok(map)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.trim().to_string(), value.trim().to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) =
            assignment.split_once('=').ok_or_else(|| invalid!("override {assignment:?} is not `key=value`"))?;
        self.set(k, v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key).map(|v| v.parse().map_err(|_| invalid!("config key `{key}` has invalid value {v:?}"))).transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "paths.cube",
    "paths.labels",
    "paths.out",
    "paths.palette",
    "paths.checkpoint",
    "paths.eval_cube",
    "paths.eval_labels",
    "features.provider",
    "features.dim",
    "features.token_dim",
    "derivative.step",
    "spectral.terms",
    "cluster.grid",
    "cluster.per_cell",
    "cluster.iterations",
    "cluster.knn",
    "cluster.window",
    "cluster.jitter",
    "labels.mode",
    "labels.classes",
    "model.heads",
    "model.blocks",
    "model.mlp_ratio",
    "train.epochs",
    "train.batch",
    "train.lr",
    "train.lr_floor",
    "train.beta1",
    "train.beta2",
    "train.eps",
    "predict.patch",
    "predict.stride",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelinePaths {
    pub cube: PathBuf,
    pub labels: PathBuf,
    pub out: PathBuf,
    pub palette: Option<PathBuf>,
    /// Load weights from here instead of training.
    pub checkpoint: Option<PathBuf>,
    /// Held-out scene to predict and score; defaults to the training scene.
    pub eval_cube: Option<PathBuf>,
    pub eval_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: PipelinePaths,
    pub stage1: Stage1Config,
    pub label_mode: LabelMode,
    /// Class count; `None` takes it from the training labels.
    pub classes: Option<usize>,
    pub heads: usize,
    pub blocks: usize,
    pub mlp_ratio: usize,
    pub train: TrainConfig,
    /// Side of the overlapping patches used for voting; `None` predicts the
    /// whole scene at once.
    pub patch: Option<usize>,
    pub stride: usize,
    pub seed: u64,
}

impl PipelineConfig {
    /// Builds the configuration; `seed` and the cube, label and output paths
    /// are required, unknown keys are rejected.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(invalid!("unknown config key `{k}`"));
        }
        let seed: u64 = map.parsed("seed")?.ok_or_else(|| invalid!("config must set `seed`"))?;
        let path = |key: &str| map.get(key).map(PathBuf::from);
        let required = |key: &str| path(key).ok_or_else(|| invalid!("config must set `{key}`"));
        let paths = PipelinePaths {
            cube: required("paths.cube")?,
            labels: required("paths.labels")?,
            out: required("paths.out")?,
            palette: path("paths.palette"),
            checkpoint: path("paths.checkpoint"),
            eval_cube: path("paths.eval_cube"),
            eval_labels: path("paths.eval_labels"),
        };
        if paths.eval_cube.is_some() != paths.eval_labels.is_some() {
            return Err(invalid!("paths.eval_cube and paths.eval_labels must be given together"));
        }
        let d = Stage1Config::default();
        let dc = ClusterConfig::default();
        let stage1 = Stage1Config {
            provider: ProviderConfig {
                kind: map.or("features.provider", d.provider.kind)?,
                dim: map.or("features.dim", d.provider.dim)?,
                seed,
            },
            token_dim: map.or("features.token_dim", d.token_dim)?,
            step: map.or("derivative.step", d.step)?,
            terms: match map.get("spectral.terms") {
                Some(v) => parse_terms(v)?,
                None => d.terms,
            },
            cluster: ClusterConfig {
                grid: map.or("cluster.grid", dc.grid)?,
                per_cell: map.or("cluster.per_cell", dc.per_cell)?,
                iterations: map.or("cluster.iterations", dc.iterations)?,
                knn: map.or("cluster.knn", dc.knn)?,
                window: map.or("cluster.window", dc.window)?,
                jitter: map.parsed("cluster.jitter")?,
            },
            seed,
        };
        stage1.validate()?;
        let dt = TrainConfig::default();
        let train = TrainConfig {
            epochs: map.or("train.epochs", dt.epochs)?,
            batch_size: map.or("train.batch", dt.batch_size)?,
            lr: map.or("train.lr", dt.lr)?,
            lr_floor: map.or("train.lr_floor", dt.lr_floor)?,
            beta1: map.or("train.beta1", dt.beta1)?,
            beta2: map.or("train.beta2", dt.beta2)?,
            eps: map.or("train.eps", dt.eps)?,
            seed,
        };
        train.validate()?;
        let dm = ModelConfig::new(stage1.token_dim, 1);
        let patch: Option<usize> = map.parsed("predict.patch")?.filter(|&p| p > 0);
        Ok(Self {
            paths,
            stage1,
            label_mode: map.or("labels.mode", LabelMode::default())?,
            classes: map.parsed("labels.classes")?,
            heads: map.or("model.heads", dm.heads)?,
            blocks: map.or("model.blocks", dm.blocks)?,
            mlp_ratio: map.or("model.mlp_ratio", dm.mlp_ratio)?,
            train,
            patch,
            stride: map.or("predict.stride", patch.map_or(1, |p| (p / 2).max(1)))?,
            seed,
        })
    }

    pub fn model(&self, classes: usize) -> ModelConfig {
        ModelConfig {
            dim: self.stage1.token_dim,
            heads: self.heads,
            blocks: self.blocks,
            classes,
            mlp_ratio: self.mlp_ratio,
        }
    }
}
