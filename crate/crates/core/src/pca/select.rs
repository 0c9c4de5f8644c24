//! Component-count selection and scree export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::PcaModel;

pub const KAISER_THRESHOLD: f64 = 1.0;
/// Achieved-variance band outside which a selection is flagged.
pub const VARIANCE_BAND: (f64, f64) = (0.85, 0.95);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    KaiserGuttman,
    VarianceTarget,
    Manual,
}

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionPolicy {
    /// Eigenvalues strictly above the threshold.
    KaiserGuttman { threshold: f64 },
    /// Smallest k whose cumulative explained variance reaches the target.
    VarianceTarget { fraction: f64 },
    Manual { k: usize },
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::KaiserGuttman {
            threshold: KAISER_THRESHOLD,
        }
    }
}

impl std::str::FromStr for SelectionPolicy {
    type Err = Error;

    /// `auto` / `kaiser` / `kaiser:<t>` / `variance:<f>` / `<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown selection policy {s:?}"));
        match s.split_once(':') {
            None if s == "auto" || s == "kaiser" => Ok(SelectionPolicy::default()),
            None => s
                .parse::<usize>()
                .map(|k| SelectionPolicy::Manual { k })
                .map_err(|_| bad()),
            Some(("kaiser", t)) => Ok(SelectionPolicy::KaiserGuttman {
                threshold: t.parse().map_err(|_| bad())?,
            }),
            Some(("variance", f)) => Ok(SelectionPolicy::VarianceTarget {
                fraction: f.parse().map_err(|_| bad())?,
            }),
            Some(_) => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSelection {
    pub k: usize,
    pub criterion: Criterion,
    pub threshold: f64,
    pub achieved_variance: f64,
}

impl ComponentSelection {
    pub fn in_variance_band(&self) -> bool {
        (VARIANCE_BAND.0..=VARIANCE_BAND.1).contains(&self.achieved_variance)
    }
}

/// Number of eigenvalues strictly greater than `threshold`, at least 1.
pub fn kaiser_guttman(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidArgument("empty eigenvalue spectrum".into()));
    }
    Ok(eigenvalues.iter().filter(|&&l| l > threshold).count().max(1))
}

/// Fraction of the total variance carried by the first `k` eigenvalues.
pub fn cumulative_explained_variance(eigenvalues: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > eigenvalues.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            eigenvalues.len()
        )));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("spectrum has no variance".into()));
    }
    if k == eigenvalues.len() {
        return Ok(1.0);
    }
    Ok(eigenvalues[..k].iter().sum::<f64>() / total)
}

pub fn select_components(eigenvalues: &[f64], policy: SelectionPolicy) -> Result<ComponentSelection> {
    let (k, criterion, threshold) = match policy {
        SelectionPolicy::KaiserGuttman { threshold } => (
            kaiser_guttman(eigenvalues, threshold)?,
            Criterion::KaiserGuttman,
            threshold,
        ),
        SelectionPolicy::VarianceTarget { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "variance target {fraction} outside (0, 1]"
                )));
            }
            let k = (1..=eigenvalues.len())
                .find(|&k| cumulative_explained_variance(eigenvalues, k).is_ok_and(|v| v >= fraction))
                .ok_or_else(|| Error::Numerical("spectrum has no variance".into()))?;
            (k, Criterion::VarianceTarget, fraction)
        }
        SelectionPolicy::Manual { k } => {
            if k == 0 || k > eigenvalues.len() {
                return Err(Error::InvalidArgument(format!(
                    "manual k = {k} outside 1..={}",
                    eigenvalues.len()
                )));
            }
            (k, Criterion::Manual, f64::NAN)
        }
    };
    // A zero spectrum (identical samples) has no meaningful fraction; any k keeps all of it.
    let achieved_variance = match cumulative_explained_variance(eigenvalues, k) {
        Ok(v) => v,
        Err(Error::Numerical(_)) => 1.0,
        Err(e) => return Err(e),
    };
    Ok(ComponentSelection {
        k,
        criterion,
        threshold,
        achieved_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeRow {
    /// 1-based component index.
    pub index: usize,
    pub eigenvalue: f64,
    pub cumulative_variance: f64,
}

pub fn scree_rows(eigenvalues: &[f64]) -> Vec<ScreeRow> {
    let total: f64 = eigenvalues.iter().sum();
    let mut running = 0.0;
    let last = eigenvalues.len();
    eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            running += l;
            let cumulative_variance = if i + 1 == last || !(total > 0.0) {
                1.0
            } else {
                (running / total).min(1.0)
            };
            ScreeRow {
                index: i + 1,
                eigenvalue: l,
                cumulative_variance,
            }
        })
        .collect()
}

pub fn scree_export(model: &PcaModel) -> Vec<ScreeRow> {
    scree_rows(model.eigenvalues())
}

/// CSV with columns `component,eigenvalue,cumulative_variance`.
pub fn scree_csv(rows: &[ScreeRow]) -> String {
    let mut out = String::from("component,eigenvalue,cumulative_variance\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:.12}", r.index, r.eigenvalue, r.cumulative_variance);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kaiser_cases() {
        assert_eq!(kaiser_guttman(&[3.2, 1.5, 0.9, 0.4], 1.0).unwrap(), 2);
        assert_eq!(kaiser_guttman(&[0.5, 0.3], 1.0).unwrap(), 1);
        assert_eq!(kaiser_guttman(&[1.0, 1.0], 1.0).unwrap(), 1);
        assert!(kaiser_guttman(&[], 1.0).is_err());
    }

    #[test]
    fn cumulative_cases() {
        assert_eq!(cumulative_explained_variance(&[4.0, 3.0, 2.0, 1.0], 2).unwrap(), 0.7);
        assert_eq!(cumulative_explained_variance(&[0.3, 0.2, 0.1], 3).unwrap(), 1.0);
        assert_eq!(cumulative_explained_variance(&[5.0, 0.0, 0.0], 1).unwrap(), 1.0);
        assert!(cumulative_explained_variance(&[0.0, 0.0], 1).is_err());
        assert!(cumulative_explained_variance(&[1.0], 0).is_err());
        assert!(cumulative_explained_variance(&[1.0], 2).is_err());
    }

    #[test]
    fn scree_running_sum() {
        let rows = scree_rows(&[4.0, 3.0, 2.0, 1.0]);
        let cum: Vec<f64> = rows.iter().map(|r| r.cumulative_variance).collect();
        for (got, want) in cum.iter().zip([0.4, 0.7, 0.9, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(rows[3].index, 4);
        assert_eq!(scree_rows(&[2.5])[0].cumulative_variance, 1.0);
        let csv = scree_csv(&rows);
        assert!(csv.starts_with("component,eigenvalue,cumulative_variance\n1,4e0,0.4"));
    }

    #[test]
    fn variance_target_and_manual() {
        let l = [4.0, 3.0, 2.0, 1.0];
        let s = select_components(&l, SelectionPolicy::VarianceTarget { fraction: 0.9 }).unwrap();
        assert_eq!(s.k, 3);
        assert!(s.in_variance_band());
        let s = select_components(&l, SelectionPolicy::Manual { k: 1 }).unwrap();
        assert_eq!((s.k, s.criterion), (1, Criterion::Manual));
        assert!(select_components(&l, SelectionPolicy::Manual { k: 5 }).is_err());
        let s = select_components(&l, SelectionPolicy::default()).unwrap();
        assert_eq!((s.k, s.criterion), (3, Criterion::KaiserGuttman));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("auto".parse::<SelectionPolicy>().unwrap(), SelectionPolicy::default());
        assert_eq!("12".parse::<SelectionPolicy>().unwrap(), SelectionPolicy::Manual { k: 12 });
        assert_eq!(
            "variance:0.9".parse::<SelectionPolicy>().unwrap(),
            SelectionPolicy::VarianceTarget { fraction: 0.9 }
        );
        assert_eq!(
            "kaiser:2".parse::<SelectionPolicy>().unwrap(),
            SelectionPolicy::KaiserGuttman { threshold: 2.0 }
        );
        assert!("nope".parse::<SelectionPolicy>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn scree_monotone(mut spec in proptest::collection::vec(0.0f64..100.0, 1..40)) {
            spec.sort_by(|a, b| b.total_cmp(a));
            let rows = scree_rows(&spec);
            for w in rows.windows(2) {
                proptest::prop_assert!(w[1].cumulative_variance >= w[0].cumulative_variance);
            }
            proptest::prop_assert_eq!(rows.last().unwrap().cumulative_variance, 1.0);
        }
    }
}
