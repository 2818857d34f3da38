use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::DatasetManifest;
use crate::augmentation::apply_chain;
use crate::error::{Error, Result};
use crate::imaging::{load_image, resize, save_image};
use crate::segmentation::{segment_image_with_window, KMeansConfig, DEFAULT_DENOISE_WINDOW};

pub const DEFAULT_TARGET_SIZE: u32 = 299;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub kmeans: KMeansConfig,
    pub denoise_window: usize,
    pub target_size: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            kmeans: KMeansConfig::default(),
            denoise_window: DEFAULT_DENOISE_WINDOW,
            target_size: DEFAULT_TARGET_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub manifest: DatasetManifest,
    /// In manifest order.
    pub failures: Vec<Failure>,
}

/// Relative location of a record's processed image.
pub fn processed_rel_path(class: &str, id: &str) -> PathBuf {
    Path::new(class).join(format!("{id}.png"))
}

/// Segments every original and derives its synthesized children.
///
/// An original is loaded, resized to `target_size` squared and segmented.
/// Each child is its chain applied to the parent's processed image, so a
/// child can always be reproduced from its parent's PNG. Work fans out over
/// a pool of `jobs` threads, one original and its children per task;
/// results are merged in manifest order so the output does not depend on
/// scheduling. Per-file failures are collected rather than aborting the run.
pub fn preprocess_all(
    manifest: &DatasetManifest,
    config: &PreprocessConfig,
    out_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<Preprocessed> {
    let out_dir = out_dir.as_ref();
    manifest.validate()?;
    config.kmeans.validate()?;
    if config.target_size == 0 {
        return Err(Error::InvalidArgument("target size must be >= 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut children: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        if let Some(pid) = &r.parent_id {
            children.entry(pid.as_str()).or_default().push(i);
        }
    }
    let groups: Vec<(usize, Vec<usize>)> = manifest
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_original())
        .map(|(i, r)| (i, children.remove(r.id.as_str()).unwrap_or_default()))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Vec<(usize, std::result::Result<PathBuf, String>)>> = pool.install(|| {
        groups
            .par_iter()
            .map(|(parent, kids)| process_group(manifest, config, out_dir, *parent, kids))
            .collect()
    });

    let mut outcome: Vec<Option<std::result::Result<PathBuf, String>>> =
        vec![None; manifest.records.len()];
    for (i, r) in results.into_iter().flatten() {
        outcome[i] = Some(r);
    }
    let mut out = manifest.clone();
    let mut failures = Vec::new();
    for (record, result) in out.records.iter_mut().zip(outcome) {
        match result.expect("every record belongs to one group") {
            Ok(rel) => record.processed_path = Some(rel),
            Err(reason) => {
                record.processed_path = None;
                failures.push(Failure {
                    id: record.id.clone(),
                    reason,
                });
            }
        }
    }
    if !out.records.is_empty() && failures.len() == out.records.len() {
        return Err(Error::AllFailed {
            count: failures.len(),
        });
    }
    Ok(Preprocessed {
        manifest: out,
        failures,
    })
}

fn process_group(
    manifest: &DatasetManifest,
    config: &PreprocessConfig,
    out_dir: &Path,
    parent: usize,
    kids: &[usize],
) -> Vec<(usize, std::result::Result<PathBuf, String>)> {
    let record = &manifest.records[parent];
    let base = load_image(&record.source_path)
        .and_then(|img| resize(&img, config.target_size, config.target_size))
        .and_then(|img| segment_image_with_window(&img, &config.kmeans, config.denoise_window))
        .map(|seg| seg.into_image());
    let base = match base {
        Ok(img) => img,
        Err(e) => {
            let reason = e.to_string();
            let mut out = vec![(parent, Err(reason.clone()))];
            out.extend(
                kids.iter()
                    .map(|&k| (k, Err(format!("parent failed: {reason}")))),
            );
            return out;
        }
    };

    let write = |id: &str, img: &crate::imaging::RasterImage| {
        let rel = processed_rel_path(record.class.name(), id);
        save_image(img, out_dir.join(&rel))
            .map(|_| rel)
            .map_err(|e| e.to_string())
    };
    let mut out = Vec::with_capacity(1 + kids.len());
    out.push((parent, write(&record.id, &base)));
    for &k in kids {
        let child = &manifest.records[k];
        let chain = child
            .chain
            .as_ref()
            .expect("validated synthesized record has a chain");
        let result = apply_chain(&base, chain)
            .map_err(|e| e.to_string())
            .and_then(|img| write(&child.id, &img));
        out.push((k, result));
    }
    out
}
