use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use super::labels::ClassLabel;
use super::manifest::{DatasetManifest, SampleRecord};
use crate::error::{Error, Result};
use crate::imaging::probe_image;

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone)]
pub struct Ingested {
    pub manifest: DatasetManifest,
    /// Skipped directories, undecodable files and empty classes.
    pub warnings: Vec<String>,
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Builds one original record per decodable image under
/// `<root>/<ClassName>/`, ordered by class index then file name. Ids are
/// `<class>-<NNNN>` with a per-class ordinal, so they are stable across runs
/// over the same tree.
pub fn ingest(root: impl AsRef<Path>, seed: u64) -> Result<Ingested> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::NotFound {
            path: root.to_path_buf(),
        });
    }
    let mut warnings = Vec::new();
    let mut note = |msg: String| {
        warn!("{msg}");
        warnings.push(msg);
    };

    let mut class_dirs: Vec<(ClassLabel, PathBuf)> = Vec::new();
    for entry in sorted_entries(root)? {
        if !entry.is_dir() {
            continue;
        }
        let name = entry
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        match name.parse::<ClassLabel>() {
            Ok(class) => class_dirs.push((class, entry)),
            Err(_) => note(format!(
                "skipping directory {}: not a known class name",
                entry.display()
            )),
        }
    }
    class_dirs.sort_by_key(|(c, _)| *c);

    let mut records = Vec::new();
    for (class, dir) in class_dirs {
        let mut ordinal = 0usize;
        for file in sorted_entries(&dir)? {
            if !file.is_file() || !has_image_extension(&file) {
                continue;
            }
            match probe_image(&file) {
                Ok(_) => {
                    let id = format!("{}-{ordinal:04}", class.name().to_lowercase());
                    records.push(SampleRecord::original(id, file, class));
                    ordinal += 1;
                }
                Err(e) => note(format!("skipping {e}")),
            }
        }
        if ordinal == 0 {
            note(format!("class directory {} has no images", dir.display()));
        }
    }

    if records.is_empty() {
        return Err(Error::NoSamples {
            root: root.to_path_buf(),
        });
    }
    Ok(Ingested {
        manifest: DatasetManifest::new(records, seed),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{save_image, RasterImage};

    fn tree() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (class, n) in [("Lion", 2), ("Cheetah", 2), ("Rhino", 2)] {
            for i in 0..n {
                let img = RasterImage::filled(5, 4, [i as u8 * 50, 10, 20]);
                save_image(&img, dir.path().join(class).join(format!("img{i}.png"))).unwrap();
            }
        }
        dir
    }

    #[test]
    fn ingests_sorted_records() {
        let dir = tree();
        let out = ingest(dir.path(), 1).unwrap();
        let ids: Vec<&str> = out.manifest.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "cheetah-0000",
                "cheetah-0001",
                "lion-0000",
                "lion-0001",
                "rhino-0000",
                "rhino-0001"
            ]
        );
        assert!(out.manifest.records[1]
            .source_path
            .ends_with("Cheetah/img1.png"));
        assert!(out.warnings.is_empty());
        assert_eq!(out.manifest.seed, 1);
    }

    #[test]
    fn ingest_is_byte_stable() {
        let dir = tree();
        let a = ingest(dir.path(), 9).unwrap().manifest.to_jsonl();
        let b = ingest(dir.path(), 9).unwrap().manifest.to_jsonl();
        assert_eq!(a, b);
    }

    #[test]
    fn skips_unknown_dirs_bad_files_and_warns_on_empty_class() {
        let dir = tree();
        fs::create_dir(dir.path().join("Tiger")).unwrap();
        fs::create_dir(dir.path().join("Panda")).unwrap();
        fs::write(dir.path().join("Lion/broken.jpg"), b"").unwrap();
        fs::write(dir.path().join("Lion/notes.txt"), b"hello").unwrap();
        let out = ingest(dir.path(), 0).unwrap();
        assert_eq!(out.manifest.len(), 6);
        assert_eq!(out.warnings.len(), 3, "{:?}", out.warnings);
        assert!(out.warnings.iter().any(|w| w.contains("Tiger")));
        assert!(out.warnings.iter().any(|w| w.contains("broken.jpg")));
        assert!(out.warnings.iter().any(|w| w.contains("Panda")));
    }

    #[test]
    fn empty_root_has_no_samples() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest(dir.path(), 0).unwrap_err();
        assert!(matches!(err, Error::NoSamples { .. }));
        assert!(err.to_string().contains("no samples"));
    }

    #[test]
    fn missing_root() {
        assert!(matches!(
            ingest("/no/such/corpus", 0),
            Err(Error::NotFound { .. })
        ));
    }
}
