//! Stratified train/test split and k-fold planning.
//!
//! Synthesized records always follow their parent, so an original and its
//! augmentations never land on different sides of a split or in different
//! folds. The split therefore moves whole parent groups; folds are dealt
//! over originals.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::labels::ClassLabel;
use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_FOLDS: usize = 5;

const SPLIT_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of test records for a class of `count` records.
pub fn test_count(count: usize, test_fraction: f64) -> usize {
    (count as f64 * test_fraction).round() as usize
}

/// Per class, puts `round(count * test_fraction)` records in test and the
/// rest in train, where `count` includes synthesized records.
///
/// Each original and its children move as one group. Groups are visited in
/// seeded-shuffle order and taken into test whenever the remaining groups
/// can still complete the closest reachable total, so the per-class test
/// count is exact whenever some choice of groups hits it.
pub fn stratified_split(
    manifest: &DatasetManifest,
    test_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    manifest.validate()?;
    let mut size: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &manifest.records {
        *size
            .entry(r.parent_id.as_deref().unwrap_or(&r.id))
            .or_default() += 1;
    }

    let mut rng = stream_rng(seed, SPLIT_STREAM);
    let mut side: BTreeMap<String, Split> = BTreeMap::new();
    for class in ClassLabel::ALL {
        let mut groups: Vec<(&str, usize)> = manifest
            .originals()
            .filter(|r| r.class == class)
            .map(|r| (r.id.as_str(), size[r.id.as_str()]))
            .collect();
        if groups.is_empty() {
            continue;
        }
        let total: usize = groups.iter().map(|g| g.1).sum();
        let too_small = || Error::ClassTooSmall {
            class: class.to_string(),
            count: total,
            needed: (2..)
                .find(|&n| (1..n).contains(&test_count(n, test_fraction)))
                .expect("some class size yields both sides"),
        };
        let target = test_count(total, test_fraction);
        if target == 0 || target == total {
            return Err(too_small());
        }
        groups.shuffle(&mut rng);

        // reach[i][s]: some subset of groups[i..] sums to s
        let mut reach = vec![vec![false; total + 1]; groups.len() + 1];
        reach[groups.len()][0] = true;
        for i in (0..groups.len()).rev() {
            let sz = groups[i].1;
            for s in 0..=total {
                reach[i][s] = reach[i + 1][s] || (s >= sz && reach[i + 1][s - sz]);
            }
        }
        // a single parent group cannot straddle the split
        let mut left = (1..total)
            .filter(|&s| reach[0][s])
            .min_by_key(|&s| (s.abs_diff(target), s))
            .ok_or(Error::ClassTooSmall {
                class: class.to_string(),
                count: groups.len(),
                needed: 2,
            })?;
        for (i, &(id, sz)) in groups.iter().enumerate() {
            let s = if sz <= left && reach[i + 1][left - sz] {
                left -= sz;
                Split::Test
            } else {
                Split::Train
            };
            side.insert(id.to_string(), s);
        }
    }

    let mut out = manifest.clone();
    for r in &mut out.records {
        let key = r.parent_id.as_ref().unwrap_or(&r.id);
        r.split = side[key];
    }
    Ok(out)
}

/// Record id to fold index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, u8>,
}

impl FoldPlan {
    pub fn fold_of(&self, id: &str) -> Option<u8> {
        self.assignment.get(id).copied()
    }

    /// Ids per fold, in id order.
    pub fn folds(&self) -> Vec<Vec<&str>> {
        let mut folds = vec![Vec::new(); self.k];
        for (id, &f) in &self.assignment {
            folds[f as usize].push(id.as_str());
        }
        folds
    }
}

/// Stratified k-fold plan over the non-test originals. Each class's shuffled
/// originals are dealt round-robin, continuing the rotation from the
/// previous class so fold totals also stay within one. Synthesized records
/// inherit the parent's fold.
pub fn kfold_plan(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "fold count must be in 2..=255, got {k}"
        )));
    }
    manifest.validate()?;
    let mut rng = stream_rng(seed, FOLD_STREAM);
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for class in ClassLabel::ALL {
        let mut ids: Vec<&str> = manifest
            .originals()
            .filter(|r| r.class == class && r.split != Split::Test)
            .map(|r| r.id.as_str())
            .collect();
        if ids.is_empty() {
            continue;
        }
        if ids.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.to_string(),
                count: ids.len(),
                needed: k,
            });
        }
        ids.shuffle(&mut rng);
        for id in ids {
            assignment.insert(id.to_string(), (next % k) as u8);
            next += 1;
        }
    }
    for r in &manifest.records {
        if let Some(pid) = &r.parent_id {
            if let Some(&f) = assignment.get(pid) {
                assignment.insert(r.id.clone(), f);
            }
        }
    }
    Ok(FoldPlan { k, assignment })
}

/// Writes the plan into the records' `fold` field; records outside the plan
/// get no fold.
pub fn apply_fold_plan(manifest: &DatasetManifest, plan: &FoldPlan) -> Result<DatasetManifest> {
    if let Some(unknown) = plan.assignment.keys().find(|id| manifest.get(id).is_none()) {
        return Err(Error::InvalidArgument(format!(
            "fold plan refers to unknown record {unknown}"
        )));
    }
    let mut out = manifest.clone();
    for r in &mut out.records {
        r.fold = plan.fold_of(&r.id);
    }
    Ok(out)
}
