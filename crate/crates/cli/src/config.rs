use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use symflow_core::datasets::{generate, DatasetSpec};
use symflow_core::graph::read_jsonl;
use symflow_core::training::{RunManifest, TrainConfig};
use symflow_core::{DatasetSplit, EncodingConfig, ModelConfig, PermutationSchedule};

fn hidden() -> usize {
    64
}
fn layers() -> usize {
    3
}
fn heads() -> usize {
    4
}
fn pair() -> usize {
    16
}

/// Network sizes; input widths follow from the encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    #[serde(default = "hidden")]
    pub hidden_dim: usize,
    #[serde(default = "layers")]
    pub num_layers: usize,
    #[serde(default = "heads")]
    pub num_heads: usize,
    #[serde(default = "pair")]
    pub pair_dim: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            hidden_dim: hidden(),
            num_layers: layers(),
            num_heads: heads(),
            pair_dim: pair(),
        }
    }
}

impl ModelShape {
    pub fn build(&self, encoding: &EncodingConfig) -> ModelConfig {
        ModelConfig::for_encoding(
            encoding,
            1,
            2,
            self.hidden_dim,
            self.num_layers,
            self.num_heads,
            self.pair_dim,
        )
    }
}

impl From<&ModelConfig> for ModelShape {
    fn from(m: &ModelConfig) -> Self {
        Self {
            hidden_dim: m.hidden_dim,
            num_layers: m.num_layers,
            num_heads: m.num_heads,
            pair_dim: m.pair_dim,
        }
    }
}

/// Contents of a `train --config` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainFile {
    #[serde(flatten)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelShape,
    /// Directory written by `dataset`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Inline dataset spec, generated on the fly when `data` is absent.
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
}

/// Reads a training config, or the manifest of an earlier training run.
pub fn load_train_file(path: &Path) -> Result<TrainFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("command").is_some() {
        let m: RunManifest = serde_json::from_value(value)?;
        let (Some(train), Some(model)) = (m.train, m.model) else {
            bail!("{} is not the manifest of a training run", path.display());
        };
        return Ok(TrainFile {
            train,
            model: ModelShape::from(&model),
            data: None,
            dataset: m.dataset,
        });
    }
    serde_json::from_value(value).with_context(|| format!("invalid training config {}", path.display()))
}

pub fn load_spec(path: &Path) -> Result<DatasetSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let spec: DatasetSpec = match value.get("command") {
        Some(_) => serde_json::from_value::<RunManifest>(value)?
            .dataset
            .with_context(|| format!("{} holds no dataset spec", path.display()))?,
        None => serde_json::from_value(value).with_context(|| format!("invalid dataset spec {}", path.display()))?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Loads the three splits and the spec from a `dataset` output directory.
pub fn load_dataset_dir(dir: &Path) -> Result<(DatasetSpec, DatasetSplit)> {
    let spec = load_spec(&dir.join(symflow_core::training::MANIFEST_FILE))
        .with_context(|| format!("no dataset manifest in {}", dir.display()))?;
    let read = |name: &str| -> Result<_> {
        let path = dir.join(name);
        read_jsonl(&path, 1, 2).with_context(|| format!("reading {}", path.display()))
    };
    let split = DatasetSplit {
        train: read("train.jsonl")?,
        val: read("val.jsonl")?,
        test: read("test.jsonl")?,
    };
    Ok((spec, split))
}

/// Resolves the dataset of a training config: a directory, else an inline spec.
pub fn resolve_dataset(file: &TrainFile) -> Result<(DatasetSpec, DatasetSplit)> {
    match (&file.data, &file.dataset) {
        (Some(dir), _) => load_dataset_dir(dir),
        (None, Some(spec)) => {
            spec.validate()?;
            Ok((spec.clone(), generate(spec)?))
        }
        (None, None) => bail!("training config names no dataset: set `data` or `dataset`, or pass --data"),
    }
}

fn default_d() -> usize {
    16
}
fn default_eval() -> usize {
    50
}
fn default_samples() -> usize {
    32
}
fn default_steps() -> usize {
    50
}

/// `sweep --grid` file: every λ is crossed with every schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub schedules: Vec<PermutationSchedule>,
    pub epochs: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub normalized: bool,
    #[serde(default = "default_eval")]
    pub eval_every: usize,
    #[serde(default = "default_samples")]
    pub samples_per_eval: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub model: ModelShape,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
}

impl SweepGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let grid: Self = serde_json::from_str(&text).with_context(|| format!("invalid sweep grid {}", path.display()))?;
        if grid.lambdas.is_empty() || grid.schedules.is_empty() {
            bail!("sweep grid is empty");
        }
        Ok(grid)
    }

    pub fn cell_config(&self, lambda: f64, schedule: PermutationSchedule, seed: u64) -> TrainConfig {
        let encoding = EncodingConfig::Sinusoidal {
            d: self.d,
            lambda,
            normalized: self.normalized,
            coverage: 1.0,
        };
        let mut cfg = TrainConfig::desk(encoding, schedule, self.epochs, seed);
        cfg.eval_every = self.eval_every.min(self.epochs.max(1));
        cfg.samples_per_eval = self.samples_per_eval;
        cfg.policy.steps = self.steps;
        cfg
    }
}
