//! Seeded train/validation/test partitioning.
//!
//! Procedure, fixed so that every run of the toolkit agrees:
//!
//! 1. Sort the ids lexicographically (input order does not matter).
//! 2. Seed a ChaCha8 stream with the 64-bit seed (`ChaCha8Rng::seed_from_u64`).
//! 3. Fisher-Yates from the back: for `i = n-1 .. 1`, draw `j` uniform in
//!    `0..=i` by rejection sampling on `next_u64` and swap `i` and `j`.
//! 4. The first `floor(n * train)` ids are training, the next
//!    `floor(n * val)` validation, and the remainder test.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RATIOS: SplitRatios = SplitRatios {
    train: 0.7,
    val: 0.1,
    test: 0.2,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "split ratios must be positive, got {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` items: floor, floor, remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 10 * 0.7 landing just below 7.
        let part = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let train = part(self.train);
        let val = part(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

pub fn split_ids(ids: &[String], ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.validate()?;
    if ids.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 records to populate train/val/test, got {}",
            ids.len()
        )));
    }
    let mut order: Vec<String> = ids.to_vec();
    order.sort();
    if order.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate ids in split input".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    let (n_train, n_val, _) = ratios.counts(order.len());
    let test_ids = order.split_off(n_train + n_val);
    let val_ids = order.split_off(n_train);
    Ok(SplitAssignment {
        train_ids: order,
        val_ids,
        test_ids,
        seed,
    })
}

pub fn split_dataset(
    records: &[crate::ingest::DatasetRecord],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    split_ids(&ids, ratios, seed)
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.train_ids.len() + self.val_ids.len() + self.test_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train_ids,
            Split::Val => &self.val_ids,
            Split::Test => &self.test_ids,
        }
    }

    /// CSV with header `id,split`, rows in train/val/test order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,split\n");
        for split in [Split::Train, Split::Val, Split::Test] {
            for id in self.ids(split) {
                out.push_str(&format!("{id},{}\n", split.as_str()));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, seed: u64) -> Result<SplitAssignment> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = SplitAssignment {
            train_ids: Vec::new(),
            val_ids: Vec::new(),
            test_ids: Vec::new(),
            seed,
        };
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (id, split) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::format("split csv", format!("line {}: {line}", lineno + 1)))?;
            if !seen.insert(id.to_owned()) {
                return Err(Error::format("split csv", format!("duplicate id {id}")));
            }
            match split {
                "train" => out.train_ids.push(id.into()),
                "val" => out.val_ids.push(id.into()),
                "test" => out.test_ids.push(id.into()),
                other => {
                    return Err(Error::format("split csv", format!("unknown split {other}")))
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i:05}")).collect()
    }

    #[test]
    fn floor_rule_sizes() {
        let s = split_ids(&ids(10), DEFAULT_RATIOS, 42).unwrap();
        assert_eq!((s.train_ids.len(), s.val_ids.len(), s.test_ids.len()), (7, 1, 2));
        assert_eq!(DEFAULT_RATIOS.counts(3983), (2788, 398, 797));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = split_ids(&ids(50), DEFAULT_RATIOS, 42).unwrap();
        let b = split_ids(&ids(50), DEFAULT_RATIOS, 42).unwrap();
        assert_eq!(a, b);
        let mut rev = ids(50);
        rev.reverse();
        assert_eq!(split_ids(&rev, DEFAULT_RATIOS, 42).unwrap(), a);
        assert_ne!(split_ids(&ids(50), DEFAULT_RATIOS, 7).unwrap(), a);
    }

    #[test]
    fn errors() {
        assert!(split_ids(&ids(2), DEFAULT_RATIOS, 1).is_err());
        let bad = SplitRatios {
            train: 0.7,
            val: 0.2,
            test: 0.2,
        };
        assert!(split_ids(&ids(10), bad, 1).is_err());
        let neg = SplitRatios {
            train: 1.1,
            val: -0.1,
            test: 0.0,
        };
        assert!(split_ids(&ids(10), neg, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = split_ids(&ids(13), DEFAULT_RATIOS, 42).unwrap();
        let p = dir.path().join("split.csv");
        s.write(&p).unwrap();
        assert_eq!(SplitAssignment::read(&p, 42).unwrap(), s);
    }

    proptest::proptest! {
        #[test]
        fn partitions(n in 3usize..400, seed in proptest::prelude::any::<u64>()) {
            let all = ids(n);
            let s = split_ids(&all, DEFAULT_RATIOS, seed).unwrap();
            proptest::prop_assert_eq!(s.len(), n);
            let mut union: Vec<String> = s.train_ids.iter().chain(&s.val_ids).chain(&s.test_ids).cloned().collect();
            union.sort();
            proptest::prop_assert_eq!(union, all);
        }
    }
}
