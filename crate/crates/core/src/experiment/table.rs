use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Original,
    Pca,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Original, Arm::Pca];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Original => "original",
            Arm::Pca => "pca",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" | "ori" => Ok(Arm::Original),
            "pca" => Ok(Arm::Pca),
            _ => Err(Error::InvalidArgument(format!("unknown arm {s:?}"))),
        }
    }
}

/// One cell of the model/dataset matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub train_dataset: String,
    pub eval_dataset: String,
    pub arm: Arm,
    pub recall: f64,
    pub dice: Option<f64>,
    pub precision: Option<f64>,
}

impl PairResult {
    pub fn is_external(&self) -> bool {
        self.train_dataset != self.eval_dataset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScores {
    pub recall: f64,
    pub dice: Option<f64>,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    arm: Arm,
    eval: usize,
    train: usize,
}

/// The full `datasets x datasets` matrix for both arms. Rows are evaluation
/// datasets, columns training datasets; the diagonal holds in-domain results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    datasets: Vec<String>,
    cells: BTreeMap<CellKey, CellScores>,
}

impl ExperimentTable {
    pub fn new(datasets: Vec<String>) -> Result<Self> {
        if datasets.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 datasets, got {}",
                datasets.len()
            )));
        }
        let mut sorted = datasets.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate dataset name {}", w[0])));
        }
        Ok(ExperimentTable {
            datasets,
            cells: BTreeMap::new(),
        })
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.datasets
            .iter()
            .position(|d| d == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown dataset {name}")))
    }

    pub fn insert(&mut self, r: PairResult) -> Result<()> {
        for v in [Some(r.recall), r.dice, r.precision].into_iter().flatten() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "score {v} outside [0, 1] for {} <- {}",
                    r.eval_dataset, r.train_dataset
                )));
            }
        }
        let key = CellKey {
            arm: r.arm,
            eval: self.index_of(&r.eval_dataset)?,
            train: self.index_of(&r.train_dataset)?,
        };
        self.cells.insert(
            key,
            CellScores {
                recall: r.recall,
                dice: r.dice,
                precision: r.precision,
            },
        );
        Ok(())
    }

    pub fn get(&self, arm: Arm, eval: usize, train: usize) -> Option<&CellScores> {
        self.cells.get(&CellKey { arm, eval, train })
    }

    pub fn recall(&self, arm: Arm, eval: usize, train: usize) -> Result<f64> {
        self.get(arm, eval, train)
            .map(|c| c.recall)
            .ok_or_else(|| Error::IncompleteTable(vec![self.pair_label(arm, eval, train)]))
    }

    pub fn pair_label(&self, arm: Arm, eval: usize, train: usize) -> String {
        format!(
            "{arm}: model {} on {}",
            self.datasets[train], self.datasets[eval]
        )
    }

    pub fn missing(&self, arm: Arm) -> Vec<String> {
        let k = self.datasets.len();
        (0..k)
            .flat_map(|e| (0..k).map(move |t| (e, t)))
            .filter(|&(e, t)| self.get(arm, e, t).is_none())
            .map(|(e, t)| self.pair_label(arm, e, t))
            .collect()
    }

    pub fn require_complete(&self, arms: &[Arm]) -> Result<()> {
        let missing: Vec<String> = arms.iter().flat_map(|&a| self.missing(a)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteTable(missing))
        }
    }

    /// All stored cells as pair results, ordered by arm, evaluation, training.
    pub fn pair_results(&self) -> Vec<PairResult> {
        self.cells
            .iter()
            .map(|(k, c)| PairResult {
                train_dataset: self.datasets[k.train].clone(),
                eval_dataset: self.datasets[k.eval].clone(),
                arm: k.arm,
                recall: c.recall,
                dice: c.dice,
                precision: c.precision,
            })
            .collect()
    }

    /// Results CSV: `arm,train_dataset,eval_dataset,recall,dice,precision`.
    pub fn to_results_csv(&self) -> String {
        let mut out = String::from("arm,train_dataset,eval_dataset,recall,dice,precision\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in self.pair_results() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.arm,
                r.train_dataset,
                r.eval_dataset,
                r.recall,
                opt(r.dice),
                opt(r.precision)
            );
        }
        out
    }

    /// Parses a results CSV. Lines starting with `#` are comments; dataset
    /// order follows first appearance.
    pub fn from_results_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::format("results csv", format!("line {line}: {why}"));
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "arm,train_dataset,eval_dataset,recall,dice,precision" {
                    return Err(bad(i + 1, "unexpected header"));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i + 1, "expected 6 fields"));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(i + 1, "bad number"))
                }
            };
            rows.push(PairResult {
                arm: f[0].parse()?,
                train_dataset: f[1].to_owned(),
                eval_dataset: f[2].to_owned(),
                recall: num(f[3])?.ok_or_else(|| bad(i + 1, "recall is required"))?,
                dice: num(f[4])?,
                precision: num(f[5])?,
            });
        }
        let mut names: Vec<String> = Vec::new();
        for r in &rows {
            for n in [&r.train_dataset, &r.eval_dataset] {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        let mut table = ExperimentTable::new(names)?;
        for r in rows {
            table.insert(r)?;
        }
        Ok(table)
    }

    pub fn read_results(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_results_csv(&text)
    }

    /// Uniform value in every cell of both arms.
    pub fn filled(datasets: Vec<String>, recall: f64) -> Result<Self> {
        let mut t = ExperimentTable::new(datasets)?;
        let names = t.datasets.clone();
        for arm in Arm::BOTH {
            for e in &names {
                for tr in &names {
                    t.insert(PairResult {
                        train_dataset: tr.clone(),
                        eval_dataset: e.clone(),
                        arm,
                        recall,
                        dice: Some(recall),
                        precision: Some(recall),
                    })?;
                }
            }
        }
        Ok(t)
    }
}

const TABLE2_FIXTURE: &str = include_str!("../../fixtures/table2/results.csv");

/// The embedded reference recall matrix: six ultrasound datasets, both arms,
/// two-decimal recall values, no Dice/precision.
pub fn table2_fixture() -> ExperimentTable {
    ExperimentTable::from_results_csv(TABLE2_FIXTURE).expect("embedded fixture parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let t = table2_fixture();
        assert_eq!(
            t.datasets(),
            &["Ardakani", "BrEaST", "BUS_UC", "BUSBRA", "BUSI", "BUSI_WHU"]
        );
        t.require_complete(&Arm::BOTH).unwrap();
        assert_eq!(t.pair_results().len(), 72);
        assert_eq!(t.recall(Arm::Original, 0, 0).unwrap(), 0.82);
        assert_eq!(t.recall(Arm::Pca, 3, 1).unwrap(), 0.66);
        assert_eq!(t.recall(Arm::Original, 5, 5).unwrap(), 0.83);
    }

    #[test]
    fn csv_round_trip() {
        let t = table2_fixture();
        let again = ExperimentTable::from_results_csv(&t.to_results_csv()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn validation() {
        assert!(ExperimentTable::new(vec!["a".into()]).is_err());
        assert!(ExperimentTable::new(vec!["a".into(), "a".into()]).is_err());
        let mut t = ExperimentTable::new(vec!["a".into(), "b".into()]).unwrap();
        let r = PairResult {
            train_dataset: "a".into(),
            eval_dataset: "c".into(),
            arm: Arm::Pca,
            recall: 0.5,
            dice: None,
            precision: None,
        };
        assert!(t.insert(r.clone()).is_err());
        let r = PairResult {
            eval_dataset: "b".into(),
            recall: 1.5,
            ..r
        };
        assert!(t.insert(r).is_err());
        let err = t.require_complete(&[Arm::Original]).unwrap_err();
        assert!(err.to_string().contains("model a on b"), "{err}");
    }
}
