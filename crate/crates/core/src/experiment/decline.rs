//! External recall-decline and worst-pair selection.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::table::{Arm, ExperimentTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclineMode {
    /// In-domain recall of the evaluation dataset's own model minus the
    /// external model's recall on that dataset.
    #[default]
    RowDiagonal,
    /// The external model's in-domain recall minus its recall on the
    /// evaluation dataset.
    ColumnDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclineRecord {
    pub eval_dataset: String,
    pub train_dataset: String,
    pub arm: Arm,
    pub decline: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub eval_dataset: String,
    pub train_dataset: String,
}

impl DeclineRecord {
    pub fn key(&self) -> PairKey {
        PairKey {
            eval_dataset: self.eval_dataset.clone(),
            train_dataset: self.train_dataset.clone(),
        }
    }
}

/// Declines for every external pair of one arm, in row-major order
/// (evaluation dataset, then training dataset).
pub fn compute_declines(table: &ExperimentTable, arm: Arm, mode: DeclineMode) -> Result<Vec<DeclineRecord>> {
    let k = table.datasets().len();
    let diagonal_missing: Vec<String> = (0..k)
        .filter(|&i| table.get(arm, i, i).is_none())
        .map(|i| table.pair_label(arm, i, i))
        .collect();
    if !diagonal_missing.is_empty() {
        return Err(Error::IncompleteTable(diagonal_missing));
    }
    let mut out = Vec::with_capacity(k * (k - 1));
    for e in 0..k {
        for t in (0..k).filter(|&t| t != e) {
            let external = table.recall(arm, e, t)?;
            let native = match mode {
                DeclineMode::RowDiagonal => table.recall(arm, e, e)?,
                DeclineMode::ColumnDiagonal => table.recall(arm, t, t)?,
            };
            out.push(DeclineRecord {
                eval_dataset: table.datasets()[e].clone(),
                train_dataset: table.datasets()[t].clone(),
                arm,
                decline: native - external,
            });
        }
    }
    Ok(out)
}

pub fn mean_decline(declines: &[DeclineRecord]) -> Result<f64> {
    if declines.is_empty() {
        return Err(Error::InvalidArgument("no declines".into()));
    }
    Ok(declines.iter().map(|d| d.decline).sum::<f64>() / declines.len() as f64)
}

// Declines are differences of short decimals; comparing them on a 1e-9 grid
// keeps ties such as 0.82 - 0.66 vs 0.83 - 0.67 ties.
fn quantized(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

fn by_decline(a: &DeclineRecord, b: &DeclineRecord) -> Ordering {
    quantized(b.decline)
        .cmp(&quantized(a.decline))
        .then_with(|| a.eval_dataset.cmp(&b.eval_dataset))
        .then_with(|| a.train_dataset.cmp(&b.train_dataset))
}

/// Sorts by decline descending, ties by `(eval_dataset, train_dataset)`.
pub fn rank_declines(declines: &[DeclineRecord]) -> Vec<DeclineRecord> {
    let mut sorted = declines.to_vec();
    sorted.sort_by(by_decline);
    sorted
}

/// The `k` pairs with the largest decline.
pub fn worst_k(declines: &[DeclineRecord], k: usize) -> Result<Vec<PairKey>> {
    if k > declines.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {k} worst pairs but only {} exist",
            declines.len()
        )));
    }
    Ok(rank_declines(declines).into_iter().take(k).map(|d| d.key()).collect())
}

/// CSV with columns `arm,eval_dataset,train_dataset,decline`.
pub fn declines_csv(declines: &[DeclineRecord]) -> String {
    let mut out = String::from("arm,eval_dataset,train_dataset,decline\n");
    for d in declines {
        let _ = writeln!(out, "{},{},{},{:.6}", d.arm, d.eval_dataset, d.train_dataset, d.decline);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::table::{table2_fixture, PairResult};

    fn rec(e: &str, t: &str, d: f64) -> DeclineRecord {
        DeclineRecord {
            eval_dataset: e.into(),
            train_dataset: t.into(),
            arm: Arm::Original,
            decline: d,
        }
    }

    #[test]
    fn flat_table_has_no_decline() {
        let t = ExperimentTable::filled(vec!["a".into(), "b".into(), "c".into()], 0.8).unwrap();
        let d = compute_declines(&t, Arm::Pca, DeclineMode::RowDiagonal).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.iter().all(|r| r.decline == 0.0));
    }

    #[test]
    fn missing_diagonal() {
        let mut t = ExperimentTable::new(vec!["a".into(), "b".into()]).unwrap();
        t.insert(PairResult {
            train_dataset: "b".into(),
            eval_dataset: "a".into(),
            arm: Arm::Original,
            recall: 0.5,
            dice: None,
            precision: None,
        })
        .unwrap();
        assert!(matches!(
            compute_declines(&t, Arm::Original, DeclineMode::RowDiagonal),
            Err(Error::IncompleteTable(_))
        ));
    }

    #[test]
    fn tie_rule_is_lexicographic() {
        let d = vec![rec("b", "a", 0.1), rec("a", "c", 0.1), rec("a", "b", 0.1)];
        let w = worst_k(&d, 2).unwrap();
        assert_eq!(w[0], PairKey { eval_dataset: "a".into(), train_dataset: "b".into() });
        assert_eq!(w[1], PairKey { eval_dataset: "a".into(), train_dataset: "c".into() });
        assert!(worst_k(&d, 4).is_err());
    }

    #[test]
    fn full_length_is_sorted_permutation() {
        let d = vec![rec("a", "b", 0.05), rec("b", "a", 0.3), rec("c", "a", -0.1)];
        let w = worst_k(&d, 3).unwrap();
        let order: Vec<&str> = w.iter().map(|k| k.eval_dataset.as_str()).collect();
        assert_eq!(order, ["b", "a", "c"]);
    }

    #[test]
    fn float_noise_does_not_break_ties() {
        let t = table2_fixture();
        let d = compute_declines(&t, Arm::Original, DeclineMode::RowDiagonal).unwrap();
        let w = worst_k(&d, 10).unwrap();
        // 0.82 - 0.66 and 0.83 - 0.67 tie at rank 10; Ardakani sorts first.
        assert_eq!(
            w[9],
            PairKey { eval_dataset: "Ardakani".into(), train_dataset: "BUSI".into() }
        );
    }

    #[test]
    fn column_mode_same_mean() {
        let t = table2_fixture();
        for arm in Arm::BOTH {
            let row = compute_declines(&t, arm, DeclineMode::RowDiagonal).unwrap();
            let col = compute_declines(&t, arm, DeclineMode::ColumnDiagonal).unwrap();
            assert!((mean_decline(&row).unwrap() - mean_decline(&col).unwrap()).abs() < 1e-12);
        }
    }
}
