//! Scoring trainer predictions into the experiment table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::manifest::{ManifestMode, PredictSplit, RunManifest};
use crate::experiment::table::{ExperimentTable, PairResult};
use crate::ingest::{load_image, load_mask, Split, SplitAssignment};
use crate::metrics::{aggregate, binarize, image_scores, Degenerate, SegmentationScores};

/// Ids a manifest's predictions must cover: the test split for in-domain
/// jobs, the configured split for external ones.
pub fn expected_ids(m: &RunManifest) -> Result<Vec<String>> {
    let split = SplitAssignment::read(&m.split_file, m.seed)?;
    let which = match m.mode {
        ManifestMode::Train => PredictSplit::Test,
        ManifestMode::Predict => m.predict_split,
    };
    let mut ids = match which {
        PredictSplit::Test => split.ids(Split::Test).to_vec(),
        PredictSplit::All => [Split::Train, Split::Val, Split::Test]
            .iter()
            .flat_map(|&s| split.ids(s).iter().cloned())
            .collect(),
    };
    ids.sort();
    Ok(ids)
}

fn png_stems(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            if let Some(stem) = path.file_stem() {
                out.insert(stem.to_string_lossy().into_owned());
            }
        }
    }
    Ok(out)
}

/// Scores `<pred_dir>/<id>.png` probability maps against `<gt_dir>/<id>.png`
/// masks. The prediction directory must hold exactly the expected ids.
pub fn score_predictions(
    pred_dir: &Path,
    gt_dir: &Path,
    ids: &[String],
    threshold: f64,
) -> Result<Vec<(String, SegmentationScores)>> {
    let found = png_stems(pred_dir)?;
    let wanted: BTreeSet<String> = ids.iter().cloned().collect();
    if found != wanted {
        let missing: Vec<&String> = wanted.difference(&found).take(5).collect();
        let extra: Vec<&String> = found.difference(&wanted).take(5).collect();
        return Err(Error::IdMismatch {
            context: pred_dir.display().to_string(),
            detail: format!(
                "{} expected, {} found; missing {missing:?}, unexpected {extra:?}",
                wanted.len(),
                found.len()
            ),
        });
    }
    wanted
        .into_par_iter()
        .map(|id| {
            let prob = load_image(&pred_dir.join(format!("{id}.png")))?;
            let gt = load_mask(&gt_dir.join(format!("{id}.png")))?;
            let pred = binarize(&prob, threshold)?;
            let s = image_scores(&pred, &gt)?;
            Ok((id, s))
        })
        .collect()
}

/// `id,recall,precision,dice,degenerate`.
pub fn per_image_csv(rows: &[(String, SegmentationScores)]) -> String {
    let mut out = String::from("id,recall,precision,dice,degenerate\n");
    for (id, s) in rows {
        let _ = writeln!(
            out,
            "{id},{:.6},{:.6},{:.6},{}",
            s.recall, s.precision, s.dice, s.degenerate
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct CellEvaluation {
    pub manifest: String,
    pub per_image: Vec<(String, SegmentationScores)>,
}

#[derive(Debug, Clone)]
pub struct Collected {
    pub table: ExperimentTable,
    pub cells: Vec<CellEvaluation>,
}

/// Builds the full table from finished jobs. Missing prediction directories
/// are gathered and reported together.
pub fn collect_results(manifests: &[RunManifest], datasets: &[String], threshold: f64) -> Result<Collected> {
    let missing: Vec<String> = manifests
        .iter()
        .filter(|m| !m.out_predictions.is_dir())
        .map(|m| format!("{}: model {} on {}", m.arm, m.train_dataset, m.eval_dataset))
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteTable(missing));
    }
    let mut table = ExperimentTable::new(datasets.to_vec())?;
    let mut cells = Vec::with_capacity(manifests.len());
    for m in manifests {
        let ids = expected_ids(m)?;
        let per_image = score_predictions(&m.out_predictions, &m.masks_dir, &ids, threshold)?;
        let scores: Vec<SegmentationScores> = per_image.iter().map(|(_, s)| *s).collect();
        let agg = aggregate(&scores, Degenerate::Exclude).map_err(|e| Error::IdMismatch {
            context: m.name.clone(),
            detail: e.to_string(),
        })?;
        table.insert(PairResult {
            train_dataset: m.train_dataset.clone(),
            eval_dataset: m.eval_dataset.clone(),
            arm: m.arm,
            recall: agg.recall,
            dice: Some(agg.dice),
            precision: Some(agg.precision),
        })?;
        cells.push(CellEvaluation {
            manifest: m.name.clone(),
            per_image,
        });
    }
    table.require_complete(&crate::experiment::table::Arm::BOTH)?;
    Ok(Collected { table, cells })
}
