use std::collections::{HashMap, HashSet};

use super::labels::ClassLabel;
use super::manifest::{DatasetManifest, SampleRecord};
use crate::augmentation::{sample_chain, sample_rng, AugmentPolicy};
use crate::error::{Error, Result};

/// Oversamples every class up to the largest original class count.
///
/// Parents are taken round-robin over the class's originals in id order. The
/// chain for the record appended at manifest position `i` is drawn from
/// [`sample_rng`]`(seed, i)`. Synthesized ids are `<parent>-s<n>` where `n`
/// counts that parent's children. Counts include existing synthesized
/// records, so balancing twice is a no-op.
pub fn balance(
    manifest: &DatasetManifest,
    seed: u64,
    policy: &AugmentPolicy,
) -> Result<DatasetManifest> {
    manifest.validate()?;
    policy.validate()?;
    let target = manifest
        .original_class_counts()
        .values()
        .copied()
        .max()
        .unwrap_or(0);
    let counts = manifest.class_counts();

    let mut out = manifest.clone();
    let mut ids: HashSet<String> = out.records.iter().map(|r| r.id.clone()).collect();
    let mut children: HashMap<String, usize> = HashMap::new();
    for r in &out.records {
        if let Some(p) = &r.parent_id {
            *children.entry(p.clone()).or_insert(0) += 1;
        }
    }

    for class in ClassLabel::ALL {
        let current = counts.get(&class).copied().unwrap_or(0);
        let mut parents: Vec<SampleRecord> = manifest
            .originals()
            .filter(|r| r.class == class)
            .cloned()
            .collect();
        if parents.is_empty() {
            if current > 0 {
                return Err(Error::InvalidManifest(format!(
                    "class {class} has records but no originals"
                )));
            }
            continue;
        }
        parents.sort_by(|a, b| a.id.cmp(&b.id));

        for j in 0..target.saturating_sub(current) {
            let parent = &parents[j % parents.len()];
            let n = children.entry(parent.id.clone()).or_insert(0);
            let mut id = format!("{}-s{}", parent.id, *n);
            while ids.contains(&id) {
                *n += 1;
                id = format!("{}-s{}", parent.id, *n);
            }
            *n += 1;
            let index = out.records.len() as u64;
            let chain = sample_chain(&mut sample_rng(seed, index), policy);
            ids.insert(id.clone());
            out.records
                .push(SampleRecord::synthesized(id, parent, chain));
        }
    }
    Ok(out)
}
