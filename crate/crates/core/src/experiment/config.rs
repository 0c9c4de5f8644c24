//! Run configuration for the end-to-end pipeline.
//!
//! ```toml
//! work_dir = "work"
//! seed = 42
//! resize = "256x256"
//! selection = "auto"
//! fit_on = "all"
//! external_eval = "all"
//!
//! [trainer]
//! command = ["python", "-m", "trainer"]
//!
//! [[dataset]]
//! name = "BUSI"
//! dir = "/data/BUSI"
//! pattern = "images/*.png"
//! masks = "masks/{stem}.png"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::decline::DeclineMode;
use crate::experiment::manifest::{check_dataset_name, PredictSplit, TrainerParams};
use crate::experiment::report::DEFAULT_WORST;
use crate::ingest::{parse_size, Layout, DEFAULT_SEED};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::pca::SelectionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitOn {
    #[default]
    All,
    Train,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    /// Program and leading arguments; the manifest path is appended.
    pub command: Vec<String>,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_batch")]
    pub batch_size: u32,
    #[serde(default = "default_patience")]
    pub patience: u32,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Concurrent trainer processes.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_epochs() -> u32 {
    100
}
fn default_batch() -> u32 {
    8
}
fn default_patience() -> u32 {
    10
}
fn default_beta() -> f64 {
    0.5
}
fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub dir: PathBuf,
    #[serde(default = "default_pattern")]
    pub pattern: String,
    pub masks: Option<String>,
}

fn default_pattern() -> String {
    "images/*.png".into()
}

impl DatasetConfig {
    pub fn layout(&self) -> Layout {
        Layout::new(self.pattern.clone(), self.masks.clone())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    work_dir: PathBuf,
    #[serde(default = "default_seed")]
    seed: u64,
    resize: Option<String>,
    #[serde(default = "default_true")]
    require_tumor: bool,
    #[serde(default = "default_selection")]
    selection: String,
    #[serde(default)]
    fit_on: FitOn,
    #[serde(default = "default_external")]
    external_eval: PredictSplit,
    #[serde(default)]
    decline: DeclineMode,
    #[serde(default = "default_worst")]
    worst: usize,
    #[serde(default = "default_threshold")]
    threshold: f64,
    trainer: TrainerConfig,
    #[serde(rename = "dataset")]
    datasets: Vec<DatasetConfig>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_true() -> bool {
    true
}
fn default_selection() -> String {
    "auto".into()
}
fn default_external() -> PredictSplit {
    PredictSplit::All
}
fn default_worst() -> usize {
    DEFAULT_WORST
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub work_dir: PathBuf,
    pub seed: u64,
    pub resize: Option<(usize, usize)>,
    pub require_tumor: bool,
    pub selection: SelectionPolicy,
    pub fit_on: FitOn,
    pub external_eval: PredictSplit,
    pub decline: DeclineMode,
    pub worst: usize,
    pub threshold: f64,
    pub trainer: TrainerConfig,
    pub datasets: Vec<DatasetConfig>,
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        if raw.trainer.command.is_empty() {
            return Err(Error::Config("trainer.command is empty".into()));
        }
        if raw.trainer.jobs == 0 {
            return Err(Error::Config("trainer.jobs must be at least 1".into()));
        }
        if !(raw.threshold > 0.0 && raw.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1]", raw.threshold)));
        }
        let mut names: Vec<&str> = raw.datasets.iter().map(|d| d.name.as_str()).collect();
        for n in &names {
            check_dataset_name(n)?;
        }
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate dataset name {}", w[0])));
        }
        if raw.datasets.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 datasets, got {}",
                raw.datasets.len()
            )));
        }
        Ok(RunConfig {
            work_dir: resolve(raw.work_dir),
            seed: raw.seed,
            resize: raw.resize.as_deref().map(parse_size).transpose()?,
            require_tumor: raw.require_tumor,
            selection: raw.selection.parse()?,
            fit_on: raw.fit_on,
            external_eval: raw.external_eval,
            decline: raw.decline,
            worst: raw.worst,
            threshold: raw.threshold,
            trainer: raw.trainer,
            datasets: raw
                .datasets
                .into_iter()
                .map(|d| DatasetConfig {
                    dir: resolve(d.dir),
                    ..d
                })
                .collect(),
        })
    }

    pub fn trainer_params(&self) -> TrainerParams {
        TrainerParams {
            epochs: self.trainer.epochs,
            batch_size: self.trainer.batch_size,
            patience: self.trainer.patience,
            beta: self.trainer.beta,
            seed: self.seed,
        }
    }

    pub fn dataset_names(&self) -> Vec<String> {
        self.datasets.iter().map(|d| d.name.clone()).collect()
    }
}
