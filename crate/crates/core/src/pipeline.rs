//! End-to-end runs: effective configuration, `run.lock`, and the
//! ingest → balance → split → fold → preprocess chain.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::augmentation::AugmentPolicy;
use crate::dataset::{
    apply_fold_plan, balance, ingest, kfold_plan, preprocess_all, stratified_split, write_manifest,
    ClassLabel, DatasetManifest, Failure, PreprocessConfig, Provenance, Split,
};
use crate::error::{Error, Result};
use crate::segmentation::{InitScheme, KMeansConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const RUN_LOCK_FILE: &str = "run.lock";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub denoise_window: usize,
    pub target_size: u32,
    pub test_fraction: f64,
    pub folds: usize,
    pub max_angle: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
    pub max_chain_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let km = KMeansConfig::default();
        let aug = AugmentPolicy::default();
        Self {
            seed: 0,
            k: km.k,
            max_iters: km.max_iters,
            tol: km.tol,
            denoise_window: crate::segmentation::DEFAULT_DENOISE_WINDOW,
            target_size: crate::dataset::DEFAULT_TARGET_SIZE,
            test_fraction: crate::dataset::DEFAULT_TEST_FRACTION,
            folds: crate::dataset::DEFAULT_FOLDS,
            max_angle: aug.max_angle,
            zoom_min: aug.zoom_min,
            zoom_max: aug.zoom_max,
            max_chain_len: aug.max_chain_len,
        }
    }
}

/// Optional overrides, as read from a config file or command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub denoise_window: Option<usize>,
    pub target_size: Option<u32>,
    pub test_fraction: Option<f64>,
    pub folds: Option<usize>,
    pub max_angle: Option<f64>,
    pub zoom_min: Option<f64>,
    pub zoom_max: Option<f64>,
    pub max_chain_len: Option<usize>,
}

impl ConfigOverrides {
    /// Parses a flat `key = value` file.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(
            seed,
            k,
            max_iters,
            tol,
            denoise_window,
            target_size,
            test_fraction,
            folds,
            max_angle,
            zoom_min,
            zoom_max,
            max_chain_len
        );
    }
}

impl PipelineConfig {
    /// Built-in defaults, then the file, then flags; the result is validated.
    pub fn resolve(file: Option<&ConfigOverrides>, flags: &ConfigOverrides) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(file) = file {
            file.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kmeans()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.augment_policy()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.denoise_window < 3 || self.denoise_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "denoise_window must be odd and >= 3, got {}",
                self.denoise_window
            )));
        }
        if self.target_size == 0 {
            return Err(Error::Config("target_size must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.folds < 2 || self.folds > 255 {
            return Err(Error::Config(format!(
                "folds must be in 2..=255, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            init: InitScheme::PlusPlus,
            ..KMeansConfig::default()
        }
    }

    pub fn augment_policy(&self) -> AugmentPolicy {
        AugmentPolicy {
            max_angle: self.max_angle,
            zoom_min: self.zoom_min,
            zoom_max: self.zoom_max,
            max_chain_len: self.max_chain_len,
        }
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            kmeans: self.kmeans(),
            denoise_window: self.denoise_window,
            target_size: self.target_size,
        }
    }

    /// Flat `key = value` text with a fixed key order. Parses back through
    /// [`ConfigOverrides::from_toml`] for seeds up to `i64::MAX`.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "denoise_window = {}", self.denoise_window);
        let _ = writeln!(s, "target_size = {}", self.target_size);
        let _ = writeln!(s, "test_fraction = {:?}", self.test_fraction);
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "max_angle = {:?}", self.max_angle);
        let _ = writeln!(s, "zoom_min = {:?}", self.zoom_min);
        let _ = writeln!(s, "zoom_max = {:?}", self.zoom_max);
        let _ = writeln!(s, "max_chain_len = {}", self.max_chain_len);
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_canonical_string().as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

/// `SOURCE_DATE_EPOCH` when set, else 0, so repeated runs write identical
/// manifests.
pub fn creation_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Echo of the effective configuration written next to run outputs.
pub fn write_run_lock(out_dir: impl AsRef<Path>, config: &PipelineConfig) -> Result<()> {
    let path = out_dir.as_ref().join(RUN_LOCK_FILE);
    let text = format!(
        "# wildprep {}\n{}config_digest = \"{}\"\n",
        env!("CARGO_PKG_VERSION"),
        config.to_canonical_string(),
        config.digest()
    );
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Stamps a manifest with the run's config digest and creation time.
pub fn stamp(manifest: &mut DatasetManifest, config: &PipelineConfig) {
    manifest.seed = config.seed;
    manifest.config_digest = config.digest();
    manifest.created = creation_timestamp();
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: DatasetManifest,
    pub warnings: Vec<String>,
    pub failures: Vec<Failure>,
}

/// Ingest, balance, split, plan folds and preprocess, writing the PNG tree,
/// `manifest.jsonl` and `run.lock` under `out_dir`.
pub fn run_all(
    root: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    config: &PipelineConfig,
    jobs: usize,
) -> Result<RunReport> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    let ingested = ingest(root, config.seed)?;
    let manifest = balance(&ingested.manifest, config.seed, &config.augment_policy())?;
    let manifest = stratified_split(&manifest, config.test_fraction, config.seed)?;
    let plan = kfold_plan(&manifest, config.folds, config.seed)?;
    let manifest = apply_fold_plan(&manifest, &plan)?;
    let processed = preprocess_all(&manifest, &config.preprocess(), out_dir, jobs)?;

    let mut manifest = processed.manifest;
    stamp(&mut manifest, config);
    write_manifest(&manifest, out_dir.join(MANIFEST_FILE))?;
    write_run_lock(out_dir, config)?;
    Ok(RunReport {
        manifest,
        warnings: ingested.warnings,
        failures: processed.failures,
    })
}

/// Per-class counts, provenance, split and fold histograms as plain text.
pub fn stats_text(manifest: &DatasetManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "records: {}", manifest.len());
    let counts = manifest.class_counts();
    let originals = manifest.original_class_counts();
    let _ = writeln!(s, "classes:");
    for class in ClassLabel::ALL {
        let _ = writeln!(
            s,
            "  {:>2} {:<11} {:>6}  (original {})",
            class.index(),
            class.name(),
            counts.get(&class).copied().unwrap_or(0),
            originals.get(&class).copied().unwrap_or(0)
        );
    }
    let count = |f: &dyn Fn(&crate::dataset::SampleRecord) -> bool| {
        manifest.records.iter().filter(|r| f(r)).count()
    };
    let _ = writeln!(
        s,
        "provenance: original {}, synthesized {}",
        count(&|r| r.provenance == Provenance::Original),
        count(&|r| r.provenance == Provenance::Synthesized)
    );
    let _ = writeln!(
        s,
        "split: train {}, test {}, unassigned {}",
        count(&|r| r.split == Split::Train),
        count(&|r| r.split == Split::Test),
        count(&|r| r.split == Split::Unassigned)
    );
    let max_fold = manifest.records.iter().filter_map(|r| r.fold).max();
    let mut folds = String::new();
    if let Some(max) = max_fold {
        for f in 0..=max {
            let _ = write!(folds, "{f}: {}, ", count(&|r| r.fold == Some(f)));
        }
    }
    let _ = writeln!(s, "folds: {folds}none: {}", count(&|r| r.fold.is_none()));
    let _ = writeln!(
        s,
        "processed: {} of {}",
        count(&|r| r.processed_path.is_some()),
        manifest.len()
    );
    s
}
