//! Trainer hand-off documents.
//!
//! The orchestrator never links against the trainer. It writes one TOML
//! manifest per job and runs the trainer command with the manifest path as
//! its last argument. A `train` job fits a model on the training split, keeps
//! the best validation checkpoint at `out_weights`, and writes probability
//! PNGs for the dataset's own test split to `out_predictions`. A `predict`
//! job loads `out_weights` and writes probability PNGs for `eval_dataset`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::table::Arm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestMode {
    Train,
    Predict,
}

/// Which ids of the evaluation dataset a job predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictSplit {
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerParams {
    pub epochs: u32,
    pub batch_size: u32,
    pub patience: u32,
    pub beta: f64,
    pub seed: u64,
}

impl Default for TrainerParams {
    fn default() -> Self {
        TrainerParams {
            epochs: 100,
            batch_size: 8,
            patience: 10,
            beta: 0.5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub mode: ManifestMode,
    pub arm: Arm,
    pub train_dataset: String,
    pub eval_dataset: String,
    pub images_dir: PathBuf,
    pub masks_dir: PathBuf,
    pub split_file: PathBuf,
    pub predict_split: PredictSplit,
    pub epochs: u32,
    pub batch_size: u32,
    pub patience: u32,
    pub beta: f64,
    pub seed: u64,
    pub out_weights: PathBuf,
    pub out_predictions: PathBuf,
    pub out_log: PathBuf,
}

impl RunManifest {
    pub fn is_external(&self) -> bool {
        self.train_dataset != self.eval_dataset
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Input paths that must exist before the trainer runs. Prediction jobs
    /// also need the weights their training job produced.
    pub fn validate_inputs(&self) -> Result<()> {
        let mut missing = Vec::new();
        for p in [&self.images_dir, &self.masks_dir, &self.split_file] {
            if !p.exists() {
                missing.push(p.display().to_string());
            }
        }
        if self.mode == ManifestMode::Predict && !self.out_weights.exists() {
            missing.push(self.out_weights.display().to_string());
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Manifest(format!(
                "{}: missing inputs {}",
                self.name,
                missing.join(", ")
            )))
        }
    }

    /// Writes the manifest once. Rewriting identical content is a no-op;
    /// different content for an existing manifest is refused.
    pub fn write_once(&self, path: &Path) -> Result<()> {
        let text = self.to_toml()?;
        match fs::read_to_string(path) {
            Ok(existing) if existing == text => return Ok(()),
            Ok(_) => {
                return Err(Error::Manifest(format!(
                    "{} already exists with different content",
                    path.display()
                )))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(path, e)),
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Where one dataset's prepared data lives, per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub name: String,
    pub original_images: PathBuf,
    pub pca_images: PathBuf,
    pub masks: PathBuf,
    pub split_file: PathBuf,
}

impl DatasetPaths {
    fn images(&self, arm: Arm) -> &Path {
        match arm {
            Arm::Original => &self.original_images,
            Arm::Pca => &self.pca_images,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    pub params: TrainerParams,
    /// Root for weights, predictions and logs.
    pub out_root: PathBuf,
    pub external_split: PredictSplit,
}

pub fn check_dataset_name(name: &str) -> Result<()> {
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
    {
        return Err(Error::Config(format!(
            "dataset name {name:?} must be non-empty ASCII letters, digits, '_', '-' or '.'"
        )));
    }
    Ok(())
}

pub fn train_manifest_name(arm: Arm, dataset: &str) -> String {
    format!("train-{arm}-{dataset}")
}

pub fn predict_manifest_name(arm: Arm, train: &str, eval: &str) -> String {
    format!("predict-{arm}-{train}-on-{eval}")
}

/// One training job per (dataset, arm) and one prediction job per external
/// (model, dataset, arm) pair, training jobs first.
pub fn plan_experiment(datasets: &[DatasetPaths], opts: &PlanOptions) -> Result<Vec<RunManifest>> {
    if datasets.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 datasets for external pairs, got {}",
            datasets.len()
        )));
    }
    let mut names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
    for n in &names {
        check_dataset_name(n)?;
    }
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate dataset name {}", w[0])));
    }

    let p = &opts.params;
    let weights = |arm: Arm, ds: &str| opts.out_root.join("models").join(arm.as_str()).join(ds).join("weights");
    let mut out = Vec::new();
    for arm in Arm::BOTH {
        for d in datasets {
            let model_dir = opts.out_root.join("models").join(arm.as_str()).join(&d.name);
            out.push(RunManifest {
                name: train_manifest_name(arm, &d.name),
                mode: ManifestMode::Train,
                arm,
                train_dataset: d.name.clone(),
                eval_dataset: d.name.clone(),
                images_dir: d.images(arm).to_path_buf(),
                masks_dir: d.masks.clone(),
                split_file: d.split_file.clone(),
                predict_split: PredictSplit::Test,
                epochs: p.epochs,
                batch_size: p.batch_size,
                patience: p.patience,
                beta: p.beta,
                seed: p.seed,
                out_weights: weights(arm, &d.name),
                out_predictions: opts
                    .out_root
                    .join("predictions")
                    .join(arm.as_str())
                    .join(&d.name)
                    .join(&d.name),
                out_log: model_dir.join("train_log.csv"),
            });
        }
    }
    for arm in Arm::BOTH {
        for t in datasets {
            for e in datasets.iter().filter(|e| e.name != t.name) {
                out.push(RunManifest {
                    name: predict_manifest_name(arm, &t.name, &e.name),
                    mode: ManifestMode::Predict,
                    arm,
                    train_dataset: t.name.clone(),
                    eval_dataset: e.name.clone(),
                    images_dir: e.images(arm).to_path_buf(),
                    masks_dir: e.masks.clone(),
                    split_file: e.split_file.clone(),
                    predict_split: opts.external_split,
                    epochs: p.epochs,
                    batch_size: p.batch_size,
                    patience: p.patience,
                    beta: p.beta,
                    seed: p.seed,
                    out_weights: weights(arm, &t.name),
                    out_predictions: opts
                        .out_root
                        .join("predictions")
                        .join(arm.as_str())
                        .join(&t.name)
                        .join(&e.name),
                    out_log: opts
                        .out_root
                        .join("models")
                        .join(arm.as_str())
                        .join(&t.name)
                        .join(format!("predict_{}.log", e.name)),
                });
            }
        }
    }
    Ok(out)
}
