//! Training loop with permutation schedules, periodic sampling and metric logging.

use crate::datasets::{DatasetSpec, DatasetSplit, FamilyParams};
use crate::denoiser::{
    load_checkpoint, loss_and_grad, save_checkpoint, AdamState, Denoiser, ModelConfig, Parameters,
    StepOutcome,
};
use crate::encodings::EncodingConfig;
use crate::error::{Error, Result};
use crate::eval::{avg_ratio, vun, MetricConfig, RatioReport, VunReport};
use crate::flow::{noise_graph, sample, NoiseDistribution, RatePolicy, T_MAX};
use crate::graph::{apply_permutation, graph_from_json_line, graph_to_json_line, Graph, Permutation};
use crate::rng::stream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RampFamily {
    /// No permutations before `at`, then one every `chi` epochs.
    Step { at: u64, chi: f64 },
    /// Frequency `1/χ` rises linearly from 0 to `1/chi_final` over `[start, end]`.
    LinearRamp { start: u64, end: u64, chi_final: f64 },
    /// As `LinearRamp` with a cosine-eased profile.
    SmoothRamp { start: u64, end: u64, chi_final: f64 },
}

/// How often the stored training graphs are relabelled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PermutationSchedule {
    Never,
    Fixed { chi: u64 },
    TimeDependent(RampFamily),
}

impl PermutationSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            Self::Never => Ok(()),
            Self::Fixed { chi } if chi == 0 => bad("chi must be >= 1".into()),
            Self::Fixed { .. } => Ok(()),
            Self::TimeDependent(RampFamily::Step { chi, .. }) if !(chi >= 1.0 && chi.is_finite()) => {
                bad(format!("chi must be >= 1, got {chi}"))
            }
            Self::TimeDependent(RampFamily::Step { .. }) => Ok(()),
            Self::TimeDependent(
                RampFamily::LinearRamp { start, end, chi_final }
                | RampFamily::SmoothRamp { start, end, chi_final },
            ) => {
                if start >= end {
                    bad(format!("ramp start {start} must precede end {end}"))
                } else if !(chi_final >= 1.0 && chi_final.is_finite()) {
                    bad(format!("chi_final must be >= 1, got {chi_final}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Expected number of permutation events in `[0, epoch]`, i.e. `∫ 1/χ`.
    pub fn cumulative_events(&self, epoch: f64) -> f64 {
        match *self {
            Self::Never => 0.0,
            Self::Fixed { chi } => epoch / chi as f64,
            Self::TimeDependent(RampFamily::Step { at, chi }) => (epoch - at as f64).max(0.0) / chi,
            Self::TimeDependent(RampFamily::LinearRamp { start, end, chi_final }) => {
                let (s, e, r) = (start as f64, end as f64, 1.0 / chi_final);
                let u = ((epoch - s) / (e - s)).clamp(0.0, 1.0);
                r * (e - s) * u * u / 2.0 + r * (epoch - e).max(0.0)
            }
            Self::TimeDependent(RampFamily::SmoothRamp { start, end, chi_final }) => {
                let (s, e, r) = (start as f64, end as f64, 1.0 / chi_final);
                let u = ((epoch - s) / (e - s)).clamp(0.0, 1.0);
                r * (e - s) * (u - (PI * u).sin() / PI) / 2.0 + r * (epoch - e).max(0.0)
            }
        }
    }
}

/// Short label used in sweep tables.
impl std::fmt::Display for PermutationSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Self::Never => write!(f, "never"),
            Self::Fixed { chi } => write!(f, "chi={chi}"),
            Self::TimeDependent(RampFamily::Step { at, chi }) => write!(f, "step@{at}:chi={chi}"),
            Self::TimeDependent(RampFamily::LinearRamp { start, end, chi_final }) => {
                write!(f, "linear{start}-{end}:chi={chi_final}")
            }
            Self::TimeDependent(RampFamily::SmoothRamp { start, end, chi_final }) => {
                write!(f, "smooth{start}-{end}:chi={chi_final}")
            }
        }
    }
}

/// Whether the training set is relabelled at the start of `epoch` (1-based).
pub fn schedule_due(epoch: u64, schedule: &PermutationSchedule) -> bool {
    match *schedule {
        PermutationSchedule::Never => false,
        PermutationSchedule::Fixed { chi } => epoch > 0 && chi > 0 && epoch % chi == 0,
        _ if epoch == 0 => false,
        _ => {
            let count = |e: u64| (schedule.cumulative_events(e as f64) + 1e-9).floor();
            count(epoch) > count(epoch - 1)
        }
    }
}

/// Relabels each graph by an independent uniform permutation.
pub fn permute_training_set<R: Rng + ?Sized>(data: &[Graph], rng: &mut R) -> Vec<Graph> {
    data.iter()
        .map(|g| {
            let p = Permutation::random(g.num_nodes(), rng);
            apply_permutation(g, &p).expect("permutation matches graph size")
        })
        .collect()
}

/// Originals followed by `factor − 1` permuted copies of the whole set.
pub fn augment<R: Rng + ?Sized>(data: &[Graph], factor: usize, rng: &mut R) -> Result<Vec<Graph>> {
    if factor == 0 {
        return Err(Error::Config("augmentation factor must be >= 1".into()));
    }
    let mut out = data.to_vec();
    for _ in 1..factor {
        out.extend(permute_training_set(data, rng));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Class frequencies of the training split.
    #[default]
    Marginal,
    Uniform,
}

fn default_batch() -> usize {
    8
}
fn default_lr() -> f64 {
    1e-3
}
fn default_edge_weight() -> f64 {
    5.0
}
fn default_factor() -> usize {
    1
}
fn default_eval_every() -> usize {
    50
}
fn default_samples() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_edge_weight")]
    pub edge_loss_weight: f64,
    pub encoding: EncodingConfig,
    pub schedule: PermutationSchedule,
    #[serde(default = "default_factor")]
    pub augmentation_factor: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_samples")]
    pub samples_per_eval: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseKind,
    /// Sampler settings used at evaluation points.
    #[serde(default)]
    pub policy: RatePolicy,
    #[serde(default)]
    pub metrics: MetricConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.batch_size == 0 || self.eval_every == 0 || self.samples_per_eval == 0 {
            return bad("batch_size, eval_every and samples_per_eval must be >= 1");
        }
        if self.augmentation_factor == 0 {
            return bad("augmentation_factor must be >= 1");
        }
        if self.epochs > 0 && self.eval_every > self.epochs {
            return bad("eval_every must not exceed epochs");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(self.edge_loss_weight.is_finite() && self.edge_loss_weight > 0.0) {
            return bad("edge_loss_weight must be positive");
        }
        self.encoding.validate()?;
        self.schedule.validate()?;
        self.policy.validate()?;
        self.metrics.validate()
    }

    /// Desk-scale SBM runs: RRWP baseline or sinusoidal encodings at `lambda`.
    pub fn desk(encoding: EncodingConfig, schedule: PermutationSchedule, epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: 8,
            lr: 1e-3,
            edge_loss_weight: 5.0,
            encoding,
            schedule,
            augmentation_factor: 1,
            eval_every: 50.min(epochs.max(1)),
            samples_per_eval: 32,
            seed,
            noise: NoiseKind::Marginal,
            policy: RatePolicy { steps: 50, ..RatePolicy::default() },
            metrics: MetricConfig::default(),
        }
    }
}

/// Model sizes used at desk scale.
pub fn desk_model(encoding: &EncodingConfig) -> ModelConfig {
    ModelConfig::for_encoding(encoding, 1, 2, 64, 3, 4, 16)
}

pub const METRICS_HEADER: &str = "epoch,loss,validity,uniqueness,novelty,vun,avg_ratio,permutation_events";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub loss: f64,
    pub vun: VunReport,
    pub ratio: RatioReport,
    pub permutation_events: u64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let ratio = self.ratio.avg_ratio.map_or_else(|| "nan".to_string(), |r| r.to_string());
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.loss,
            self.vun.validity,
            self.vun.uniqueness,
            self.vun.novelty,
            self.vun.vun,
            ratio,
            self.permutation_events
        )
    }
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub epoch: usize,
    pub permutation_events: u64,
    pub adam: AdamState,
    /// Current (possibly relabelled) training set, one JSON graph per entry.
    pub train_set: Vec<String>,
}

/// One training run, advanced an epoch at a time.
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Denoiser,
    pub family: FamilyParams,
    adam: AdamState,
    train_set: Vec<Graph>,
    reference: DatasetSplit,
    noise: NoiseDistribution,
    epoch: usize,
    permutation_events: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, split: &DatasetSplit, family: FamilyParams, model_cfg: ModelConfig) -> Result<Self> {
        config.validate()?;
        model_cfg.validate()?;
        if split.train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        let (x, e) = (split.train[0].node_classes(), split.train[0].edge_classes());
        model_cfg.ensure_classes(x, e)?;
        let probe = config.encoding.encode(&split.train[0], &mut stream(0, "probe", &[]))?;
        let want = ModelConfig::for_encoding(
            &config.encoding,
            x,
            e,
            model_cfg.hidden_dim,
            model_cfg.num_layers,
            model_cfg.num_heads,
            model_cfg.pair_dim,
        );
        if (want.node_in_dim, want.edge_in_dim) != (model_cfg.node_in_dim, model_cfg.edge_in_dim)
            || probe.node_dim() + x + crate::denoiser::TIME_DIM != model_cfg.node_in_dim
        {
            return Err(Error::Config("model input widths do not match the encoding".into()));
        }
        let params = Parameters::init(&model_cfg, &mut stream(config.seed, "init", &[]))?;
        let train_set = augment(&split.train, config.augmentation_factor, &mut stream(config.seed, "augment", &[]))?;
        let noise = match config.noise {
            NoiseKind::Marginal => NoiseDistribution::empirical(&split.train, x, e),
            NoiseKind::Uniform => NoiseDistribution::uniform(x, e),
        };
        noise.validate()?;
        Ok(Self {
            adam: AdamState::new(params.len(), config.lr)?,
            model: Denoiser {
                params,
                config: model_cfg,
                encoding: config.encoding.clone(),
            },
            config,
            family,
            train_set,
            reference: split.clone(),
            noise,
            epoch: 0,
            permutation_events: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn permutation_events(&self) -> u64 {
        self.permutation_events
    }

    pub fn train_set(&self) -> &[Graph] {
        &self.train_set
    }

    pub fn noise(&self) -> &NoiseDistribution {
        &self.noise
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Runs the next epoch and returns its mean per-graph loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let epoch = self.epoch + 1;
        let seed = self.config.seed;
        if schedule_due(epoch as u64, &self.config.schedule) {
            self.train_set = permute_training_set(&self.train_set, &mut stream(seed, "permute", &[epoch as u64]));
            self.permutation_events += 1;
        }
        let mut order: Vec<usize> = (0..self.train_set.len()).collect();
        {
            use rand::seq::SliceRandom;
            order.shuffle(&mut stream(seed, "shuffle", &[epoch as u64]));
        }
        let cfg = &self.config;
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let model = &self.model;
            let data = &self.train_set;
            let noise = &self.noise;
            let results: Vec<Result<(f64, Vec<f64>)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = stream(seed, "noise", &[epoch as u64, i as u64]);
                    let t = rng.random_range(0.0..T_MAX);
                    let g1 = &data[i];
                    let gt = noise_graph(g1, t, noise, &mut rng)?;
                    let enc = model.encoding.encode(&gt, &mut rng)?;
                    loss_and_grad(&gt, t, &enc, g1, cfg.edge_loss_weight, &model.params, &model.config)
                })
                .collect();
            let mut grad = vec![0.0; self.model.params.len()];
            for r in results {
                let (loss, g) = match r {
                    Ok(v) => v,
                    Err(Error::NonFinite(msg)) => return Err(Error::NonFinite(format!("epoch {epoch}: {msg}"))),
                    Err(e) => return Err(e),
                };
                total += loss;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|x| *x *= scale);
            if self.adam.step(&mut self.model.params.values, &grad)? == StepOutcome::Skipped {
                eprintln!("warning: epoch {epoch}: optimizer step skipped");
            }
        }
        self.epoch = epoch;
        Ok(total / self.train_set.len() as f64)
    }

    /// Samples `samples_per_eval` graphs with sizes drawn from the training split.
    pub fn sample_graphs(&self, count: usize, tag: u64) -> Result<Vec<Graph>> {
        let sizes: Vec<usize> = self.reference.train.iter().map(Graph::num_nodes).collect();
        (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(self.config.seed, "sample", &[tag, k as u64]);
                let n = sizes[rng.random_range(0..sizes.len())];
                sample(&self.model, n, &self.noise, &self.config.policy, &mut rng)
            })
            .collect()
    }

    pub fn evaluate(&self, loss: f64) -> Result<MetricsRow> {
        let generated = self.sample_graphs(self.config.samples_per_eval, self.epoch as u64)?;
        let m = &self.config.metrics;
        let test = if self.reference.test.is_empty() { &self.reference.train } else { &self.reference.test };
        Ok(MetricsRow {
            epoch: self.epoch,
            loss,
            vun: vun(&generated, &self.reference.train, &self.family, m)?,
            ratio: avg_ratio(&generated, &self.reference.train, test, m)?,
            permutation_events: self.permutation_events,
        })
    }

    /// Runs one epoch, evaluating when it lands on an eval point.
    pub fn step(&mut self) -> Result<(f64, Option<MetricsRow>)> {
        let loss = self.run_epoch()?;
        if self.epoch % self.config.eval_every == 0 {
            Ok((loss, Some(self.evaluate(loss)?)))
        } else {
            Ok((loss, None))
        }
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            epoch: self.epoch,
            permutation_events: self.permutation_events,
            adam: self.adam.clone(),
            train_set: self.train_set.iter().map(graph_to_json_line).collect(),
        }
    }

    pub fn restore(&mut self, state: TrainerState, params: Parameters) -> Result<()> {
        if params.len() != self.model.params.len() || state.adam.m.len() != params.len() {
            return Err(Error::Checkpoint("saved state does not match the model".into()));
        }
        let (x, e) = (self.model.config.node_classes, self.model.config.edge_classes);
        let train_set = state
            .train_set
            .iter()
            .map(|l| graph_from_json_line(l, x as u8, e as u8))
            .collect::<Result<Vec<_>>>()?;
        self.epoch = state.epoch;
        self.permutation_events = state.permutation_events;
        self.adam = state.adam;
        self.train_set = train_set;
        self.model.params = params;
        Ok(())
    }
}

/// Configuration echo written into every run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the version string.
    pub version_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<RatePolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            version: crate::VERSION.into(),
            version_hash: Sha256::digest(crate::VERSION.as_bytes()).iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            dataset: None,
            family: None,
            train: None,
            model: None,
            policy: None,
            metrics: None,
            extra: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = if dir.is_dir() { dir.join(MANIFEST_FILE) } else { dir.to_path_buf() };
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub rows: Vec<MetricsRow>,
    pub final_loss: Option<f64>,
    pub out_dir: PathBuf,
}

fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("epoch_{epoch:06}.ckpt"))
}

fn state_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("epoch_{epoch:06}.state.json"))
}

fn save_point(trainer: &Trainer, dir: &Path) -> Result<()> {
    let m = &trainer.model;
    save_checkpoint(&checkpoint_path(dir, trainer.epoch), &m.params, &m.config, &m.encoding)?;
    fs::write(state_path(dir, trainer.epoch), serde_json::to_string(&trainer.state())?)?;
    Ok(())
}

/// Latest epoch with both a checkpoint and a state file in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<usize>> {
    let ckpt_dir = dir.join("checkpoints");
    if !ckpt_dir.is_dir() {
        return Ok(None);
    }
    let mut best = None;
    for entry in fs::read_dir(&ckpt_dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(e) = name.strip_prefix("epoch_").and_then(|s| s.strip_suffix(".ckpt")) {
            if let Ok(e) = e.parse::<usize>() {
                if state_path(dir, e).exists() && best.is_none_or(|b| e > b) {
                    best = Some(e);
                }
            }
        }
    }
    Ok(best)
}

/// Full run: metrics CSV, a checkpoint at every eval point, and the manifest.
///
/// With `resume`, the latest checkpoint in `out_dir` is restored and the
/// metrics file is continued from it.
pub fn train(
    config: &TrainConfig,
    split: &DatasetSplit,
    family: &FamilyParams,
    model_cfg: &ModelConfig,
    out_dir: &Path,
    manifest: &RunManifest,
    resume: bool,
) -> Result<TrainOutcome> {
    fs::create_dir_all(out_dir.join("checkpoints"))?;
    let mut trainer = Trainer::new(config.clone(), split, family.clone(), model_cfg.clone())?;
    let csv_path = out_dir.join("metrics.csv");
    let mut rows_kept = Vec::new();
    if resume {
        if let Some(e) = latest_checkpoint(out_dir)? {
            let (params, _, _) = load_checkpoint(&checkpoint_path(out_dir, e), Some(model_cfg))?;
            let state: TrainerState = serde_json::from_str(&fs::read_to_string(state_path(out_dir, e))?)?;
            trainer.restore(state, params)?;
            if csv_path.exists() {
                for line in BufReader::new(File::open(&csv_path)?).lines().skip(1) {
                    let line = line?;
                    let epoch: usize = line.split(',').next().and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
                    if epoch <= e {
                        rows_kept.push(line);
                    }
                }
            }
        }
    }
    let mut csv = File::create(&csv_path)?;
    writeln!(csv, "{METRICS_HEADER}")?;
    for line in &rows_kept {
        writeln!(csv, "{line}")?;
    }
    let mut csv = OpenOptions::new().append(true).open(&csv_path)?;

    let mut manifest = manifest.clone();
    manifest.train = Some(config.clone());
    manifest.model = Some(model_cfg.clone());
    manifest.family = Some(family.clone());
    manifest.policy = Some(config.policy.clone());
    manifest.metrics = Some(config.metrics.clone());
    manifest.outputs = vec!["metrics.csv".into(), "checkpoints".into()];
    manifest.write(out_dir)?;

    let mut rows = Vec::new();
    let mut final_loss = None;
    while !trainer.is_finished() {
        let (loss, row) = match trainer.step() {
            Ok(v) => v,
            Err(e @ Error::NonFinite(_)) => {
                let m = &trainer.model;
                let _ = save_checkpoint(&out_dir.join("checkpoints").join("diagnostic.ckpt"), &m.params, &m.config, &m.encoding);
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        final_loss = Some(loss);
        if let Some(row) = row {
            writeln!(csv, "{}", row.to_csv())?;
            csv.flush()?;
            save_point(&trainer, out_dir)?;
            rows.push(row);
        }
    }
    Ok(TrainOutcome {
        rows,
        final_loss,
        out_dir: out_dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate;
    use crate::denoiser::loss_value;
    use crate::graph::{canonical_hash, is_isomorphic};
    use proptest::prelude::*;
    use rand::Rng;

    fn census(gs: &[Graph]) -> Vec<u64> {
        let mut h: Vec<u64> = gs.iter().map(canonical_hash).collect();
        h.sort_unstable();
        h
    }

    #[test]
    fn fixed_and_never_schedules() {
        let fixed = PermutationSchedule::Fixed { chi: 10 };
        let due: Vec<u64> = (1..=30).filter(|&e| schedule_due(e, &fixed)).collect();
        assert_eq!(due, vec![10, 20, 30]);
        assert!(!schedule_due(0, &fixed));
        assert!((0..1000).all(|e| !schedule_due(e, &PermutationSchedule::Never)));
    }

    #[test]
    fn step_schedule_switches_on() {
        let s = PermutationSchedule::TimeDependent(RampFamily::Step { at: 50, chi: 5.0 });
        let due: Vec<u64> = (1..=70).filter(|&e| schedule_due(e, &s)).collect();
        assert_eq!(due, vec![55, 60, 65, 70]);
    }

    #[test]
    fn ramp_event_counts_match_integral() {
        // ∫ over [0, 100] of a ramp reaching 1/5 is 10 for both profiles
        for s in [
            PermutationSchedule::TimeDependent(RampFamily::SmoothRamp { start: 0, end: 100, chi_final: 5.0 }),
            PermutationSchedule::TimeDependent(RampFamily::LinearRamp { start: 0, end: 100, chi_final: 5.0 }),
        ] {
            let n = (1..=100).filter(|&e| schedule_due(e, &s)).count();
            let trapezoid: f64 = (0..100000)
                .map(|k| {
                    let u = (k as f64 + 0.5) / 1000.0 / 100.0;
                    match s {
                        PermutationSchedule::TimeDependent(RampFamily::SmoothRamp { .. }) => 0.2 * (1.0 - (PI * u).cos()) / 2.0,
                        _ => 0.2 * u,
                    }
                })
                .sum::<f64>()
                / 1000.0;
            assert!((n as f64 - trapezoid.round()).abs() <= 1.0, "{n} events vs {trapezoid}");
            // frequency never decreases: gaps between events shrink or stay
            let due: Vec<u64> = (1..=400).filter(|&e| schedule_due(e, &s)).collect();
            let gaps: Vec<u64> = due.windows(2).map(|w| w[1] - w[0]).collect();
            assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1), "{gaps:?}");
        }
    }

    #[test]
    fn invalid_schedules_and_configs() {
        assert!(PermutationSchedule::Fixed { chi: 0 }.validate().is_err());
        let ramp = RampFamily::SmoothRamp { start: 10, end: 10, chi_final: 5.0 };
        assert!(PermutationSchedule::TimeDependent(ramp).validate().is_err());
        let enc = EncodingConfig::Rrwp { k: 4 };
        let mut cfg = TrainConfig::desk(enc, PermutationSchedule::Never, 100, 1);
        cfg.validate().unwrap();
        cfg.eval_every = 200;
        assert!(cfg.validate().is_err());
        cfg.eval_every = 10;
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn schedule_json_shape() {
        let s = PermutationSchedule::TimeDependent(RampFamily::SmoothRamp { start: 0, end: 500, chi_final: 10.0 });
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"time_dependent","family":"smooth_ramp","start":0,"end":500,"chi_final":10.0}"#);
        assert_eq!(serde_json::from_str::<PermutationSchedule>(&j).unwrap(), s);
        let f: PermutationSchedule = serde_json::from_str(r#"{"kind":"fixed","chi":10}"#).unwrap();
        assert_eq!(f, PermutationSchedule::Fixed { chi: 10 });
    }

    #[test]
    fn permutation_preserves_isomorphism_classes() {
        let split = generate(&DatasetSpec::preset("sbm-desk").unwrap()).unwrap();
        let data = &split.train[..20];
        let out = permute_training_set(data, &mut stream(3, "p", &[]));
        assert!(data.iter().zip(&out).all(|(a, b)| is_isomorphic(a, b)));
        assert_eq!(census(data), census(&out));
        assert_eq!(out, permute_training_set(data, &mut stream(3, "p", &[])));
        let single = vec![Graph::empty(1); 3];
        assert_eq!(permute_training_set(&single, &mut stream(3, "p", &[])), single);
    }

    #[test]
    fn augmentation_scales_census() {
        let split = generate(&DatasetSpec::preset("sbm-desk").unwrap()).unwrap();
        let data = &split.train[..10];
        let mut rng = stream(4, "a", &[]);
        assert_eq!(augment(data, 1, &mut rng).unwrap(), data.to_vec());
        let out = augment(data, 3, &mut rng).unwrap();
        assert_eq!(out.len(), 30);
        let mut want: Vec<u64> = census(data).into_iter().flat_map(|h| [h; 3]).collect();
        want.sort_unstable();
        assert_eq!(census(&out), want);
        assert!(augment(data, 0, &mut rng).is_err());
    }

    fn tiny_run(encoding: EncodingConfig, epochs: usize) -> (TrainConfig, DatasetSplit, FamilyParams, ModelConfig) {
        let spec = DatasetSpec { count: 20, ..DatasetSpec::preset("sbm-desk").unwrap() };
        let split = generate(&spec).unwrap();
        let mut cfg = TrainConfig::desk(encoding.clone(), PermutationSchedule::Fixed { chi: 2 }, epochs, 9);
        cfg.eval_every = 2.min(epochs.max(1));
        cfg.samples_per_eval = 3;
        cfg.policy.steps = 5;
        let model = ModelConfig::for_encoding(&encoding, 1, 2, 8, 1, 2, 4);
        (cfg, split, spec.params, model)
    }

    #[test]
    fn training_runs_are_reproducible_and_resumable() {
        let (cfg, split, family, model) = tiny_run(EncodingConfig::Rrwp { k: 3 }, 4);
        let manifest = RunManifest::new("train", cfg.seed);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = train(&cfg, &split, &family, &model, a.path(), &manifest, false).unwrap();
        train(&cfg, &split, &family, &model, b.path(), &manifest, false).unwrap();
        let csv_a = fs::read_to_string(a.path().join("metrics.csv")).unwrap();
        assert_eq!(csv_a, fs::read_to_string(b.path().join("metrics.csv")).unwrap());
        assert_eq!(ra.rows.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(ra.rows[1].permutation_events, 2);

        // stop at epoch 2, then resume to 4
        let c = tempfile::tempdir().unwrap();
        let short = TrainConfig { epochs: 2, ..cfg.clone() };
        train(&short, &split, &family, &model, c.path(), &manifest, false).unwrap();
        train(&cfg, &split, &family, &model, c.path(), &manifest, true).unwrap();
        assert_eq!(csv_a, fs::read_to_string(c.path().join("metrics.csv")).unwrap());
        assert_eq!(RunManifest::read(c.path()).unwrap().train.unwrap(), cfg);
    }

    #[test]
    fn zero_epochs_writes_header_and_manifest_only() {
        let (cfg, split, family, model) = tiny_run(EncodingConfig::Rrwp { k: 3 }, 0);
        let dir = tempfile::tempdir().unwrap();
        let r = train(&cfg, &split, &family, &model, dir.path(), &RunManifest::new("train", 0), false).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(fs::read_to_string(dir.path().join("metrics.csv")).unwrap(), format!("{METRICS_HEADER}\n"));
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn loss_decreases_on_a_fixed_batch() {
        let (_, split, _, _) = tiny_run(EncodingConfig::Rrwp { k: 3 }, 1);
        let enc_cfg = EncodingConfig::Rrwp { k: 3 };
        let cfg = ModelConfig::for_encoding(&enc_cfg, 1, 2, 16, 1, 2, 8);
        let mut params = Parameters::init(&cfg, &mut stream(1, "init", &[])).unwrap();
        let noise = NoiseDistribution::empirical(&split.train, 1, 2);
        let batch: Vec<(Graph, Graph, f64)> = split.train[..4]
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut rng = stream(2, "b", &[i as u64]);
                let t = rng.random_range(0.0..1.0);
                (noise_graph(g, t, &noise, &mut rng).unwrap(), g.clone(), t)
            })
            .collect();
        let mut adam = AdamState::new(params.len(), 1e-3).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let mut total = 0.0;
            let mut grad = vec![0.0; params.len()];
            for (gt, g1, t) in &batch {
                let (l, g) = loss_and_grad(gt, *t, &crate::encodings::rrwp(gt, 3), g1, 5.0, &params, &cfg).unwrap();
                total += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / batch.len() as f64);
            }
            assert!(total < last, "loss rose from {last} to {total}");
            last = total;
            adam.step(&mut params.values, &grad).unwrap();
        }
    }

    #[test]
    fn relabeling_changes_losses_only_without_equivariance() {
        let split = generate(&DatasetSpec { count: 20, ..DatasetSpec::preset("sbm-desk").unwrap() }).unwrap();
        let noise = NoiseDistribution::empirical(&split.train, 1, 2);
        for (enc, equivariant) in [
            (EncodingConfig::Rrwp { k: 4 }, true),
            (EncodingConfig::Sinusoidal { d: 16, lambda: 1.0, normalized: false, coverage: 1.0 }, false),
        ] {
            let cfg = ModelConfig::for_encoding(&enc, 1, 2, 16, 2, 2, 4);
            let params = Parameters::init(&cfg, &mut stream(5, "init", &[])).unwrap();
            let mut max_diff: f64 = 0.0;
            for (i, g1) in split.train.iter().take(8).enumerate() {
                let mut rng = stream(6, "n", &[i as u64]);
                let gt = noise_graph(g1, 0.5, &noise, &mut rng).unwrap();
                let p = Permutation::random(g1.num_nodes(), &mut rng);
                let (pt, p1) = (apply_permutation(&gt, &p).unwrap(), apply_permutation(g1, &p).unwrap());
                let enc_a = enc.encode(&gt, &mut stream(0, "e", &[])).unwrap();
                let enc_b = enc.encode(&pt, &mut stream(0, "e", &[])).unwrap();
                let a = loss_value(&gt, 0.5, &enc_a, g1, 5.0, &params, &cfg).unwrap();
                let b = loss_value(&pt, 0.5, &enc_b, &p1, 5.0, &params, &cfg).unwrap();
                max_diff = max_diff.max((a - b).abs());
            }
            if equivariant {
                assert!(max_diff < 1e-8, "{max_diff}");
            } else {
                assert!(max_diff > 1e-6, "{max_diff}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn schedule_events_follow_cumulative_rate(start in 0u64..50, len in 1u64..200, chi in 1.0f64..20.0) {
            let s = PermutationSchedule::TimeDependent(RampFamily::LinearRamp { start, end: start + len, chi_final: chi });
            let horizon = start + len + 100;
            let n = (1..=horizon).filter(|&e| schedule_due(e, &s)).count() as f64;
            prop_assert!((n - s.cumulative_events(horizon as f64)).abs() <= 1.0);
        }
    }
}
