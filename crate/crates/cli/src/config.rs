//! Experiment configuration: built-in defaults, then a `key=value` file,
//! then `--set` overrides, then dedicated flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use relstab_core::corruption::{NoiseKind, StampSpec};
use relstab_core::datagen::SyntheticSpec;
use relstab_core::explain::{Explainer, ExplainerKind, LimeConfig, LrpConfig, OcclusionConfig};
use relstab_core::model::TrainConfig;
use relstab_core::rssa::{Aggregation, NoiseGrid, RssaConfig};

use crate::error::{CliError, CliResult};

/// A corruption family swept over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Noise(NoiseKind),
    Didactic,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Noise(k) => k.name(),
            SweepKind::Didactic => "didactic",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        if s.trim().eq_ignore_ascii_case("didactic") {
            return Ok(SweepKind::Didactic);
        }
        s.parse::<NoiseKind>().map(SweepKind::Noise).map_err(|_| {
            CliError::config(format!("unknown corruption kind {s:?} (expected gaussian, rician, chisq or didactic)"))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub data: SyntheticSpec,
    pub train: TrainConfig,
    pub split_ratio: f64,
    pub kinds: Vec<SweepKind>,
    pub lambdas: Vec<f64>,
    pub fractions: Vec<f64>,
    pub explainers: Vec<ExplainerKind>,
    pub eval_images: usize,
    pub lime: LimeConfig,
    pub occlusion: OcclusionConfig,
    pub lrp: LrpConfig,
    pub rssa: RssaConfig,
    pub stamp: StampSpec,
    pub sweep_epochs: usize,
    pub sweep_batch_size: usize,
    pub sweep_eval_images: usize,
    pub sweep_lime_samples: usize,
    pub test_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus"),
            checkpoint: PathBuf::from("out/model.ckpt"),
            out: PathBuf::from("out"),
            seed: 1,
            jobs: 1,
            data: SyntheticSpec::default(),
            train: TrainConfig::default(),
            split_ratio: 0.8,
            kinds: vec![
                SweepKind::Noise(NoiseKind::Gaussian),
                SweepKind::Noise(NoiseKind::Rician),
                SweepKind::Noise(NoiseKind::ChiSquared),
            ],
            lambdas: vec![0.0, 0.05, 0.10, 0.15, 0.20],
            fractions: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            explainers: ExplainerKind::ALL.to_vec(),
            eval_images: 8,
            lime: LimeConfig::default(),
            occlusion: OcclusionConfig::default(),
            lrp: LrpConfig::default(),
            rssa: RssaConfig::default(),
            stamp: StampSpec::default(),
            sweep_epochs: 2,
            sweep_batch_size: 4,
            sweep_eval_images: 4,
            sweep_lime_samples: 200,
            test_only: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.trim().parse().map_err(|_| CliError::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> CliResult<T>) -> CliResult<Vec<T>> {
    let items: Vec<T> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::config(format!("{key}: list must not be empty")));
    }
    Ok(items)
}

pub fn parse_explainers(value: &str) -> CliResult<Vec<ExplainerKind>> {
    parse_list("explainers", value, |s| s.parse::<ExplainerKind>().map_err(CliError::from))
}

impl ExperimentConfig {
    /// Applies one `key=value` setting. Keys not known here are tried against
    /// the synthetic data spec.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.trim();
        match key {
            "corpus" => self.corpus = PathBuf::from(value.trim()),
            "checkpoint" => self.checkpoint = PathBuf::from(value.trim()),
            "out" => self.out = PathBuf::from(value.trim()),
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "shuffle" => self.train.shuffle = parse_bool(key, value)?,
            "track_train_accuracy" => self.train.track_train_accuracy = parse_bool(key, value)?,
            "split_ratio" => self.split_ratio = parse(key, value)?,
            "kinds" => self.kinds = parse_list(key, value, str::parse)?,
            "lambdas" => self.lambdas = parse_list(key, value, |s| parse(key, s))?,
            "fractions" => self.fractions = parse_list(key, value, |s| parse(key, s))?,
            "explainers" => self.explainers = parse_explainers(value)?,
            "eval_images" => self.eval_images = parse(key, value)?,
            "lime_samples" => self.lime.n_samples = parse(key, value)?,
            "lime_grid" => self.lime.grid = parse(key, value)?,
            "lime_kernel_width" => self.lime.kernel_width = Some(parse(key, value)?),
            "lime_ridge" => self.lime.ridge = parse(key, value)?,
            "occlusion_patch" => self.occlusion.patch = parse(key, value)?,
            "occlusion_stride" => self.occlusion.stride = parse(key, value)?,
            "lrp_epsilon" => self.lrp.epsilon = parse(key, value)?,
            "rssa_aggregation" => {
                self.rssa.aggregation = match value.trim() {
                    "windowed" => Aggregation::WindowedMean,
                    "whole" => Aggregation::WholeImage,
                    other => return Err(CliError::config(format!("{key}: expected windowed or whole, got {other:?}"))),
                }
            }
            "stamp_margin" => self.stamp.margin = parse(key, value)?,
            "stamp_intensity" => self.stamp.intensity = parse(key, value)?,
            "sweep_epochs" => self.sweep_epochs = parse(key, value)?,
            "sweep_batch_size" => self.sweep_batch_size = parse(key, value)?,
            "sweep_eval_images" => self.sweep_eval_images = parse(key, value)?,
            "sweep_lime_samples" => self.sweep_lime_samples = parse(key, value)?,
            "test_only" => self.test_only = parse_bool(key, value)?,
            _ => self.data.set(key, value)?,
        }
        Ok(())
    }

    /// Applies a `key=value` text: one setting per line, `#` comments allowed.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected key=value, got {line:?}", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_override(&mut self, kv: &str) -> CliResult<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::config(format!("--set expects key=value, got {kv:?}")))?;
        self.set(k, v)
    }

    /// The master seed drives every seeded stage.
    pub fn seeded(&self) -> SyntheticSpec {
        SyntheticSpec { seed: self.seed, ..self.data.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    /// Per-cell training for the sweep. Two epochs at batch 16 stay at chance on the
    /// default corpus, so cells take smaller batches.
    pub fn sweep_train_config(&self) -> TrainConfig {
        TrainConfig { epochs: self.sweep_epochs, batch_size: self.sweep_batch_size, ..self.train_config() }
    }

    pub fn noise_grid(&self) -> NoiseGrid {
        let kinds = self
            .kinds
            .iter()
            .filter_map(|k| match k {
                SweepKind::Noise(n) => Some(*n),
                SweepKind::Didactic => None,
            })
            .collect();
        NoiseGrid { kinds, lambdas: self.lambdas.clone(), seed: self.seed }
    }

    pub fn explainer(&self, kind: ExplainerKind) -> Explainer {
        match kind {
            ExplainerKind::Lrp => Explainer::Lrp(self.lrp),
            ExplainerKind::Lime => Explainer::Lime(LimeConfig { seed: self.seed, ..self.lime }),
            ExplainerKind::Occlusion => Explainer::Occlusion(self.occlusion),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(CliError::config(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio)));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(CliError::config(format!("λ values must lie in [0, 1], got {l}")));
        }
        if let Some(p) = self.fractions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CliError::config(format!("fractions must lie in [0, 1], got {p}")));
        }
        if self.eval_images == 0 || self.sweep_eval_images == 0 {
            return Err(CliError::config("evaluation image counts must be at least 1"));
        }
        self.data.validate()?;
        self.train_config().validate()?;
        Ok(())
    }
}
