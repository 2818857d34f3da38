//! The sample ledger and its JSON-lines file format.
//!
//! Line 1 is a header object carrying the run seed, creation time and config
//! digest. Every following line is one record with keys in the fixed order
//! `id, source_path, processed_path, class, class_index, provenance,
//! parent_id, chain, split, fold`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::ClassLabel;
use crate::augmentation::AugmentChain;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "wildprep-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Synthesized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub source_path: PathBuf,
    /// Relative to the directory holding the manifest.
    pub processed_path: Option<PathBuf>,
    pub class: ClassLabel,
    pub provenance: Provenance,
    pub parent_id: Option<String>,
    pub chain: Option<AugmentChain>,
    pub split: Split,
    pub fold: Option<u8>,
}

impl SampleRecord {
    pub fn original(
        id: impl Into<String>,
        source_path: impl Into<PathBuf>,
        class: ClassLabel,
    ) -> Self {
        Self {
            id: id.into(),
            source_path: source_path.into(),
            processed_path: None,
            class,
            provenance: Provenance::Original,
            parent_id: None,
            chain: None,
            split: Split::Unassigned,
            fold: None,
        }
    }

    pub fn synthesized(id: impl Into<String>, parent: &SampleRecord, chain: AugmentChain) -> Self {
        Self {
            id: id.into(),
            source_path: parent.source_path.clone(),
            processed_path: None,
            class: parent.class,
            provenance: Provenance::Synthesized,
            parent_id: Some(parent.id.clone()),
            chain: Some(chain),
            split: parent.split,
            fold: parent.fold,
        }
    }

    pub fn is_original(&self) -> bool {
        self.provenance == Provenance::Original
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        match self.provenance {
            Provenance::Original if self.parent_id.is_some() || self.chain.is_some() => {
                Err(format!(
                    "original record {} must not carry parent_id or chain",
                    self.id
                ))
            }
            Provenance::Synthesized if self.parent_id.is_none() || self.chain.is_none() => Err(
                format!("synthesized record {} needs parent_id and chain", self.id),
            ),
            _ => Ok(()),
        }
    }
}

/// One serialized record line. Field order is the on-disk key order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    source_path: PathBuf,
    processed_path: Option<PathBuf>,
    class: ClassLabel,
    class_index: usize,
    provenance: Provenance,
    parent_id: Option<String>,
    chain: Option<AugmentChain>,
    split: Split,
    fold: Option<u8>,
}

impl From<&SampleRecord> for RecordLine {
    fn from(r: &SampleRecord) -> Self {
        Self {
            id: r.id.clone(),
            source_path: r.source_path.clone(),
            processed_path: r.processed_path.clone(),
            class: r.class,
            class_index: r.class.index(),
            provenance: r.provenance,
            parent_id: r.parent_id.clone(),
            chain: r.chain.clone(),
            split: r.split,
            fold: r.fold,
        }
    }
}

impl TryFrom<RecordLine> for SampleRecord {
    type Error = String;

    fn try_from(l: RecordLine) -> std::result::Result<Self, String> {
        if l.class_index != l.class.index() {
            return Err(format!(
                "class_index {} does not match class {}",
                l.class_index, l.class
            ));
        }
        let r = SampleRecord {
            id: l.id,
            source_path: l.source_path,
            processed_path: l.processed_path,
            class: l.class,
            provenance: l.provenance,
            parent_id: l.parent_id,
            chain: l.chain,
            split: l.split,
            fold: l.fold,
        };
        r.check()?;
        Ok(r)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    format: String,
    version: u32,
    seed: u64,
    created: u64,
    config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub created: u64,
    pub config_digest: String,
}

impl DatasetManifest {
    pub fn new(records: Vec<SampleRecord>, seed: u64) -> Self {
        Self {
            records,
            seed,
            created: 0,
            config_digest: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn originals(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.is_original())
    }

    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.class).or_insert(0) += 1;
        }
        counts
    }

    pub fn original_class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts = BTreeMap::new();
        for r in self.originals() {
            *counts.entry(r.class).or_insert(0) += 1;
        }
        counts
    }

    /// Checks id uniqueness, per-record provenance rules, and that every
    /// synthesized record points at an original of its own class.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            r.check().map_err(Error::InvalidManifest)?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate id {}", r.id)));
            }
        }
        let by_id: HashMap<&str, &SampleRecord> =
            self.records.iter().map(|r| (r.id.as_str(), r)).collect();
        for r in &self.records {
            if let Some(pid) = &r.parent_id {
                match by_id.get(pid.as_str()) {
                    Some(p) if p.is_original() && p.class == r.class => {}
                    Some(_) => {
                        return Err(Error::InvalidManifest(format!(
                            "parent {pid} of {} is not an original of class {}",
                            r.id, r.class
                        )))
                    }
                    None => {
                        return Err(Error::InvalidManifest(format!(
                            "parent {pid} of {} is missing",
                            r.id
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let header = HeaderLine {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            seed: self.seed,
            created: self.created,
            config_digest: self.config_digest.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&RecordLine::from(r)).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses manifest text; `path` is only used in error messages.
    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Err(err(1, "missing header".into()));
        }
        let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().expect("non-empty body has a line");
        let header: HeaderLine =
            serde_json::from_str(first).map_err(|e| err(1, format!("bad header: {e}")))?;
        if header.format != MANIFEST_FORMAT || header.version != MANIFEST_VERSION {
            return Err(err(
                1,
                format!("unsupported format {} v{}", header.format, header.version),
            ));
        }
        let mut records = Vec::new();
        for (no, line) in lines {
            let parsed: RecordLine =
                serde_json::from_str(line).map_err(|e| err(no, e.to_string()))?;
            records.push(SampleRecord::try_from(parsed).map_err(|e| err(no, e))?);
        }
        let manifest = Self {
            records,
            seed: header.seed,
            created: header.created,
            config_digest: header.config_digest,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, manifest.to_jsonl()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound {
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    DatasetManifest::from_jsonl(&text, path)
}
