//! Table renderers: the recall grid with per-column means, and the stratified
//! Ori-vs-PCA comparison.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::decline::{compute_declines, rank_declines, DeclineMode, PairKey};
use crate::experiment::table::{Arm, CellScores, ExperimentTable};
use crate::stats::{paired_t_test, summarize, SampleSummary, TestResult, ALPHA};

/// `|Diff|` at or above this is emphasized.
pub const EMPHASIS_THRESHOLD: f64 = 0.05;
// Diffs of two-decimal values land within a few ulps of the threshold.
const EMPHASIS_SLACK: f64 = 1e-9;
pub const DEFAULT_WORST: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Recall,
    Dice,
    Precision,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Dice => "dice",
            Metric::Precision => "precision",
        }
    }

    fn pick(self, c: &CellScores) -> Option<f64> {
        match self {
            Metric::Recall => Some(c.recall),
            Metric::Dice => c.dice,
            Metric::Precision => c.precision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub ori: f64,
    pub pca: f64,
    pub diff: f64,
}

impl GridCell {
    fn new(ori: f64, pca: f64) -> Self {
        GridCell {
            ori,
            pca,
            diff: pca - ori,
        }
    }

    pub fn emphasized(&self) -> bool {
        self.diff.abs() >= EMPHASIS_THRESHOLD - EMPHASIS_SLACK
    }
}

/// Evaluation datasets as rows, training datasets as column groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub metric: Metric,
    pub datasets: Vec<String>,
    /// `cells[eval][train]`.
    pub cells: Vec<Vec<GridCell>>,
    /// Unweighted column means, one per training dataset.
    pub means: Vec<GridCell>,
}

pub fn render_table2(table: &ExperimentTable, metric: Metric) -> Result<Table2> {
    table.require_complete(&Arm::BOTH)?;
    let k = table.datasets().len();
    let value = |arm, e, t| -> Result<f64> {
        let cell = table.get(arm, e, t).expect("complete table");
        metric.pick(cell).ok_or_else(|| {
            Error::IncompleteTable(vec![format!("{} ({})", table.pair_label(arm, e, t), metric.as_str())])
        })
    };
    let mut cells = Vec::with_capacity(k);
    for e in 0..k {
        let row = (0..k)
            .map(|t| Ok(GridCell::new(value(Arm::Original, e, t)?, value(Arm::Pca, e, t)?)))
            .collect::<Result<Vec<_>>>()?;
        cells.push(row);
    }
    let means = (0..k)
        .map(|t| {
            let ori = cells.iter().map(|r| r[t].ori).sum::<f64>() / k as f64;
            let pca = cells.iter().map(|r| r[t].pca).sum::<f64>() / k as f64;
            GridCell::new(ori, pca)
        })
        .collect();
    Ok(Table2 {
        metric,
        datasets: table.datasets().to_vec(),
        cells,
        means,
    })
}

impl Table2 {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eval_dataset");
        for d in &self.datasets {
            let _ = write!(out, ",{d}_ori,{d}_pca,{d}_diff");
        }
        out.push('\n');
        let mut row = |name: &str, cells: &[GridCell]| {
            out.push_str(name);
            for c in cells {
                let _ = write!(out, ",{:.4},{:.4},{:.4}", c.ori, c.pca, c.diff);
            }
            out.push('\n');
        };
        for (name, cells) in self.datasets.iter().zip(&self.cells) {
            row(name, cells);
        }
        row("Mean", &self.means);
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "{} per model/dataset pair. Rows: evaluation dataset; column groups: training dataset. \
             **Bold**: |Diff| >= {EMPHASIS_THRESHOLD}.\n\n|",
            capitalize(self.metric.as_str())
        );
        for d in &self.datasets {
            let _ = write!(out, " | {d} Ori | {d} PCA | {d} Diff");
        }
        out.push_str(" |\n|---");
        out.push_str(&"|---:".repeat(3 * self.datasets.len()));
        out.push_str("|\n");
        let mut row = |name: &str, cells: &[GridCell]| {
            let _ = write!(out, "| {name}");
            for c in cells {
                let diff = fmt_signed(c.diff);
                let diff = if c.emphasized() { format!("**{diff}**") } else { diff };
                let _ = write!(out, " | {:.2} | {:.2} | {diff}", c.ori, c.pca);
            }
            out.push_str(" |\n");
        };
        for (name, cells) in self.datasets.iter().zip(&self.cells) {
            row(name, cells);
        }
        row("Mean", &self.means);
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

fn fmt_signed(v: f64) -> String {
    // avoid "-0.00"
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmComparison {
    pub metric: Metric,
    pub ori: SampleSummary,
    pub pca: SampleSummary,
    /// Paired two-tailed test of PCA minus Ori; absent when degenerate.
    pub test: Option<TestResult>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub label: String,
    pub pairs: Vec<PairKey>,
    pub recall: ArmComparison,
    /// Present only when every pair has Dice values in both arms.
    pub dice: Option<ArmComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3 {
    pub strata: Vec<Stratum>,
}

fn compare(table: &ExperimentTable, pairs: &[PairKey], metric: Metric) -> Result<Option<ArmComparison>> {
    let mut ori = Vec::with_capacity(pairs.len());
    let mut pca = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (e, t) = (table.index_of(&p.eval_dataset)?, table.index_of(&p.train_dataset)?);
        let cell = |arm| {
            table
                .get(arm, e, t)
                .ok_or_else(|| Error::IncompleteTable(vec![table.pair_label(arm, e, t)]))
        };
        match (metric.pick(cell(Arm::Original)?), metric.pick(cell(Arm::Pca)?)) {
            (Some(o), Some(q)) => {
                ori.push(o);
                pca.push(q);
            }
            _ => return Ok(None),
        }
    }
    let test = match paired_t_test(&ori, &pca) {
        Ok(r) => Some(r),
        Err(Error::DegenerateTest(_)) => None,
        Err(Error::InvalidArgument(_)) if ori.len() < 2 => None,
        Err(e) => return Err(e),
    };
    Ok(Some(ArmComparison {
        metric,
        ori: summarize(&ori)?,
        pca: summarize(&pca)?,
        degenerate: test.is_none(),
        test,
    }))
}

/// Strata: all external pairs, the `worst` pairs by original-arm recall
/// decline, and the remainder. Empty strata are omitted.
pub fn summarize_table3(table: &ExperimentTable, worst: usize, mode: DeclineMode) -> Result<Table3> {
    table.require_complete(&Arm::BOTH)?;
    let ranked: Vec<PairKey> = rank_declines(&compute_declines(table, Arm::Original, mode)?)
        .into_iter()
        .map(|d| d.key())
        .collect();
    if worst > ranked.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {worst} worst pairs but only {} external pairs exist",
            ranked.len()
        )));
    }
    let mut all = ranked.clone();
    all.sort();
    let worst_pairs = ranked[..worst].to_vec();
    let mut other = ranked[worst..].to_vec();
    other.sort();

    let mut strata = Vec::new();
    for (label, pairs) in [
        ("All pairs".to_string(), all),
        (format!("Worst {worst}"), worst_pairs),
        (format!("Other {}", ranked.len() - worst), other),
    ] {
        if pairs.is_empty() {
            continue;
        }
        let recall = compare(table, &pairs, Metric::Recall)?.expect("recall always present");
        let dice = compare(table, &pairs, Metric::Dice)?;
        strata.push(Stratum {
            label,
            pairs,
            recall,
            dice,
        });
    }
    Ok(Table3 { strata })
}

impl Table3 {
    pub fn stratum(&self, label: &str) -> Option<&Stratum> {
        self.strata.iter().find(|s| s.label == label)
    }

    /// CSV: `stratum,metric,n,ori_mean,ori_std,pca_mean,pca_std,t,df,p,significant`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stratum,metric,n,ori_mean,ori_std,pca_mean,pca_std,t,df,p,significant\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for s in &self.strata {
            for c in std::iter::once(&s.recall).chain(s.dice.as_ref()) {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{},{:.6},{},{},{},{},{}",
                    s.label,
                    c.metric.as_str(),
                    c.ori.n,
                    c.ori.mean,
                    opt(c.ori.std),
                    c.pca.mean,
                    opt(c.pca.std),
                    opt(c.test.map(|t| t.t)),
                    opt(c.test.map(|t| t.df)),
                    c.test.map(|t| format!("{:.6e}", t.p)).unwrap_or_else(|| "degenerate".into()),
                    c.test.is_some_and(|t| t.significant()),
                );
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "Ori vs PCA over external pairs; p from paired two-tailed t-tests, **bold** when p < {ALPHA}.\n\n\
             | Stratum | Metric | n | Ori | PCA | p |\n|---|---|---:|---:|---:|---:|\n"
        );
        let pm = |s: &SampleSummary| match s.std {
            Some(sd) => format!("{:.2} ± {:.2}", s.mean, sd),
            None => format!("{:.2}", s.mean),
        };
        for s in &self.strata {
            for c in std::iter::once(&s.recall).chain(s.dice.as_ref()) {
                let p = match c.test {
                    Some(t) if t.significant() => format!("**{}**", fmt_p(t.p)),
                    Some(t) => fmt_p(t.p),
                    None => "n/a".into(),
                };
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} |",
                    s.label,
                    c.metric.as_str(),
                    c.ori.n,
                    pm(&c.ori),
                    pm(&c.pca),
                    p
                );
            }
        }
        out
    }
}

fn fmt_p(p: f64) -> String {
    if p >= 0.01 {
        format!("{p:.2}")
    } else {
        format!("{p:.1e}")
    }
}
