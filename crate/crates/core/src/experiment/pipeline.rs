//! End-to-end orchestration: ingest, PCA, trainer jobs, evaluation, reports.
//!
//! Everything lives under the configured work directory:
//!
//! ```text
//! data/<dataset>/original/{images,masks}/<id>.png
//! data/<dataset>/pca/images/<id>.png
//! data/<dataset>/pca/scree.csv
//! data/<dataset>/split.csv
//! data/pca_selection.csv
//! runs/models/<arm>/<train>/...       trainer outputs
//! runs/predictions/<arm>/<train>/<eval>/<id>.png
//! manifests/<job>.toml, <job>.done, <job>.log
//! evaluation/<job>.csv                per-image scores
//! evaluation/results.csv              the filled model/dataset matrix
//! reports/                            tables, declines, scree exports
//! stages/<stage>.done
//! ```
//!
//! Each stage leaves a marker when it finishes and each trainer job leaves
//! its own marker, so rerunning after an interruption picks up where the
//! previous run stopped.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};

use crate::error::{Error, Result};
use crate::experiment::collect::{collect_results, per_image_csv};
use crate::experiment::config::{FitOn, RunConfig};
use crate::experiment::decline::{compute_declines, declines_csv, DeclineMode};
use crate::experiment::manifest::{plan_experiment, DatasetPaths, ManifestMode, PlanOptions, RunManifest};
use crate::experiment::report::{render_table2, summarize_table3, Metric};
use crate::experiment::table::{Arm, ExperimentTable};
use crate::ingest::{load_dataset, split_dataset, write_dataset, Layout, LoadOptions, Split, SplitAssignment, DEFAULT_RATIOS};
use crate::pca::{harmonize_dataset, scree_csv, scree_export, FitScope, HarmonizeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Pca,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Pca, Stage::Train, Stage::Evaluate, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Pca => "pca",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Run only this stage. Earlier stages must already be complete.
    pub stage: Option<Stage>,
    /// Skip everything but reporting and read `results.csv` from here.
    pub results_from: Option<PathBuf>,
    /// Reports directory; defaults to `<work_dir>/reports`.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub reports_dir: PathBuf,
    pub ran: Vec<Stage>,
    pub skipped: Vec<Stage>,
}

struct Workspace {
    root: PathBuf,
    reports: PathBuf,
}

impl Workspace {
    fn dataset(&self, name: &str) -> PathBuf {
        self.root.join("data").join(name)
    }
    fn split_file(&self, name: &str) -> PathBuf {
        self.dataset(name).join("split.csv")
    }
    fn manifests(&self) -> PathBuf {
        self.root.join("manifests")
    }
    fn marker(&self, stage: Stage) -> PathBuf {
        self.root.join("stages").join(format!("{stage}.done"))
    }
    fn is_done(&self, stage: Stage) -> bool {
        self.marker(stage).is_file()
    }
    fn mark(&self, stage: Stage) -> Result<()> {
        write_file(&self.marker(stage), "")
    }
    fn results_csv(&self) -> PathBuf {
        self.root.join("evaluation").join("results.csv")
    }
    fn dataset_paths(&self, name: &str) -> DatasetPaths {
        let d = self.dataset(name);
        DatasetPaths {
            name: name.to_owned(),
            original_images: d.join("original").join("images"),
            pca_images: d.join("pca").join("images"),
            masks: d.join("original").join("masks"),
            split_file: self.split_file(name),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn reset_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(|e| Error::io(path, e))?;
    }
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn run_pipeline(cfg: &RunConfig, opts: &PipelineOptions) -> Result<PipelineSummary> {
    fs::create_dir_all(&cfg.work_dir).map_err(|e| Error::io(&cfg.work_dir, e))?;
    let root = fs::canonicalize(&cfg.work_dir).map_err(|e| Error::io(&cfg.work_dir, e))?;
    let reports = opts.out.clone().unwrap_or_else(|| root.join("reports"));
    let ws = Workspace { root, reports };

    if let Some(dir) = &opts.results_from {
        let table = ExperimentTable::read_results(&dir.join("results.csv"))?;
        write_reports(&table, cfg.worst, cfg.decline, &ws.reports)?;
        return Ok(PipelineSummary {
            reports_dir: ws.reports,
            ran: vec![Stage::Report],
            skipped: Vec::new(),
        });
    }

    let (mut ran, mut skipped) = (Vec::new(), Vec::new());
    let stages: Vec<Stage> = match opts.stage {
        Some(only) => {
            let pending: Vec<String> = Stage::ALL
                .into_iter()
                .take_while(|&s| s != only)
                .filter(|&s| !ws.is_done(s))
                .map(|s| s.to_string())
                .collect();
            if !pending.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "stage {only} needs completed stages: {}",
                    pending.join(", ")
                )));
            }
            vec![only]
        }
        None => Stage::ALL.to_vec(),
    };
    for stage in stages {
        if opts.stage.is_none() && ws.is_done(stage) {
            info!("stage {stage} already complete");
            skipped.push(stage);
            continue;
        }
        info!("stage {stage}");
        match stage {
            Stage::Ingest => stage_ingest(cfg, &ws)?,
            Stage::Pca => stage_pca(cfg, &ws)?,
            Stage::Train => stage_train(cfg, &ws)?,
            Stage::Evaluate => stage_evaluate(cfg, &ws)?,
            Stage::Report => {
                let table = ExperimentTable::read_results(&ws.results_csv())?;
                write_reports(&table, cfg.worst, cfg.decline, &ws.reports)?;
                write_file(&ws.reports.join("results.csv"), &table.to_results_csv())?;
                copy_pca_reports(cfg, &ws)?;
            }
        }
        ws.mark(stage)?;
        ran.push(stage);
    }
    Ok(PipelineSummary {
        reports_dir: ws.reports,
        ran,
        skipped,
    })
}

fn stage_ingest(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let load = LoadOptions {
        resize: cfg.resize,
        require_tumor: cfg.require_tumor,
    };
    for d in &cfg.datasets {
        if d.masks.is_none() {
            return Err(Error::Config(format!("dataset {} has no mask template", d.name)));
        }
        let records = load_dataset(&d.dir, &d.layout(), &load)?;
        if records.is_empty() {
            return Err(Error::ingest(&d.dir, "no usable records"));
        }
        let split = split_dataset(&records, DEFAULT_RATIOS, cfg.seed)?;
        let out = ws.dataset(&d.name).join("original");
        reset_dir(&out)?;
        write_dataset(&records, &out)?;
        split.write(&ws.split_file(&d.name))?;
        info!(
            "{}: {} records ({} train / {} val / {} test)",
            d.name,
            records.len(),
            split.train_ids.len(),
            split.val_ids.len(),
            split.test_ids.len()
        );
    }
    Ok(())
}

fn stage_pca(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let mut summary = String::from("dataset,n_fit,dim,k_max,k,criterion,threshold,achieved_variance\n");
    for d in &cfg.datasets {
        let src = ws.dataset(&d.name).join("original");
        let records = load_dataset(&src, &Layout::exported(), &LoadOptions::default())?;
        let fit_on = match cfg.fit_on {
            FitOn::All => FitScope::All,
            FitOn::Train => {
                let split = SplitAssignment::read(&ws.split_file(&d.name), cfg.seed)?;
                FitScope::Subset(split.ids(Split::Train).iter().cloned().collect::<HashSet<_>>())
            }
        };
        let h = harmonize_dataset(
            &records,
            &HarmonizeOptions {
                policy: cfg.selection,
                fit_on,
            },
        )?;
        let images = ws.dataset(&d.name).join("pca").join("images");
        reset_dir(&images)?;
        for r in &h.records {
            r.image.save_png(&images.join(format!("{}.png", r.id)))?;
        }
        write_file(&ws.dataset(&d.name).join("pca").join("scree.csv"), &scree_csv(&scree_export(&h.model)))?;
        let criterion = match h.selection.criterion {
            crate::pca::Criterion::KaiserGuttman => "kaiser-guttman",
            crate::pca::Criterion::VarianceTarget => "variance-target",
            crate::pca::Criterion::Manual => "manual",
        };
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{:.6}",
            d.name,
            h.model.n_samples(),
            h.model.dim(),
            h.model.k_max(),
            h.selection.k,
            criterion,
            h.selection.threshold,
            h.selection.achieved_variance
        );
    }
    write_file(&ws.root.join("data").join("pca_selection.csv"), &summary)
}

/// Copies the PCA stage's scree exports and selection summary into the reports.
fn copy_pca_reports(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let mut pairs = vec![(ws.root.join("data").join("pca_selection.csv"), ws.reports.join("pca_selection.csv"))];
    for d in &cfg.datasets {
        pairs.push((
            ws.dataset(&d.name).join("pca").join("scree.csv"),
            ws.reports.join(format!("scree_{}.csv", d.name)),
        ));
    }
    fs::create_dir_all(&ws.reports).map_err(|e| Error::io(&ws.reports, e))?;
    for (from, to) in pairs {
        fs::copy(&from, &to).map_err(|e| Error::io(&from, e))?;
    }
    Ok(())
}

fn plan(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<RunManifest>> {
    let datasets: Vec<DatasetPaths> = cfg.datasets.iter().map(|d| ws.dataset_paths(&d.name)).collect();
    plan_experiment(
        &datasets,
        &PlanOptions {
            params: cfg.trainer_params(),
            out_root: ws.root.join("runs"),
            external_split: cfg.external_eval,
        },
    )
}

fn stage_train(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let manifests = plan(cfg, ws)?;
    let dir = ws.manifests();
    for m in &manifests {
        m.write_once(&dir.join(format!("{}.toml", m.name)))?;
    }
    for mode in [ManifestMode::Train, ManifestMode::Predict] {
        let pending: Vec<&RunManifest> = manifests
            .iter()
            .filter(|m| m.mode == mode)
            .filter(|m| !dir.join(format!("{}.done", m.name)).is_file())
            .collect();
        info!("{} {:?} jobs pending", pending.len(), mode);
        run_jobs(&pending, cfg.trainer.jobs, |m| run_trainer(&cfg.trainer.command, &dir, m))?;
    }
    Ok(())
}

/// Runs `f` over `items` on up to `jobs` threads and returns the first error.
fn run_jobs<T: Sync>(items: &[T], jobs: usize, f: impl Fn(&T) -> Result<()> + Sync) -> Result<()> {
    let next = AtomicUsize::new(0);
    let first_err: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(items.len()) {
            s.spawn(|| loop {
                if first_err.lock().expect("lock").is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { return };
                if let Err(e) = f(item) {
                    first_err.lock().expect("lock").get_or_insert(e);
                }
            });
        }
    });
    match first_err.into_inner().expect("lock") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_trainer(command: &[String], manifest_dir: &Path, m: &RunManifest) -> Result<()> {
    m.validate_inputs()?;
    let path = manifest_dir.join(format!("{}.toml", m.name));
    info!("trainer: {}", m.name);
    let output = Command::new(&command[0])
        .args(&command[1..])
        .arg(&path)
        .output()
        .map_err(|e| Error::Trainer {
            manifest: path.clone(),
            detail: format!("cannot start {}: {e}", command[0]),
        })?;
    let log_path = manifest_dir.join(format!("{}.log", m.name));
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    log.write_all(&output.stdout)
        .and_then(|_| log.write_all(&output.stderr))
        .map_err(|e| Error::io(&log_path, e))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
        return Err(Error::Trainer {
            manifest: path,
            detail: format!(
                "{}; {}",
                output.status,
                tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
            ),
        });
    }
    if !m.out_predictions.is_dir() {
        return Err(Error::Trainer {
            manifest: path,
            detail: format!("no predictions at {}", m.out_predictions.display()),
        });
    }
    write_file(&manifest_dir.join(format!("{}.done", m.name)), "")
}

fn stage_evaluate(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let manifests = plan(cfg, ws)?;
    let collected = collect_results(&manifests, &cfg.dataset_names(), cfg.threshold)?;
    let eval_dir = ws.root.join("evaluation");
    reset_dir(&eval_dir)?;
    for cell in &collected.cells {
        write_file(&eval_dir.join(format!("{}.csv", cell.manifest)), &per_image_csv(&cell.per_image))?;
    }
    write_file(&ws.results_csv(), &collected.table.to_results_csv())
}

/// Writes the recall grid (and the Dice grid when every cell has Dice), the
/// stratified comparison and the per-pair declines for both arms.
pub fn write_reports(table: &ExperimentTable, worst: usize, mode: DeclineMode, dir: &Path) -> Result<()> {
    table.require_complete(&Arm::BOTH)?;
    let mut metrics = vec![(Metric::Recall, "table2")];
    if table.pair_results().iter().all(|r| r.dice.is_some()) {
        metrics.push((Metric::Dice, "table2_dice"));
    }
    for (metric, stem) in metrics {
        let t2 = render_table2(table, metric)?;
        write_file(&dir.join(format!("{stem}.csv")), &t2.to_csv())?;
        write_file(&dir.join(format!("{stem}.md")), &t2.to_markdown())?;
    }
    let k = table.datasets().len();
    let external = k * (k - 1);
    let worst = if worst > external {
        warn!("only {external} external pairs; worst stratum reduced from {worst}");
        external
    } else {
        worst
    };
    let t3 = summarize_table3(table, worst, mode)?;
    write_file(&dir.join("table3.csv"), &t3.to_csv())?;
    write_file(&dir.join("table3.md"), &t3.to_markdown())?;
    let mut declines = Vec::new();
    for arm in Arm::BOTH {
        declines.extend(compute_declines(table, arm, mode)?);
    }
    write_file(&dir.join("declines.csv"), &declines_csv(&declines))
}
