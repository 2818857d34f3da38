#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wildprep::dataset::ClassLabel;
use wildprep::{save_image, RasterImage};

/// A photo-like test image: a shaded background with a few colored blobs
/// and mild noise.
pub fn synthetic_photo(rng: &mut impl Rng, width: u32, height: u32) -> RasterImage {
    let bg: [f64; 3] = [
        rng.random_range(0.0..255.0),
        rng.random_range(0.0..255.0),
        rng.random_range(0.0..255.0),
    ];
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..rng.random_range(1..4))
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(5.0..(width.min(height) as f64 / 2.0).max(6.0)),
                [
                    rng.random_range(0.0..255.0),
                    rng.random_range(0.0..255.0),
                    rng.random_range(0.0..255.0),
                ],
            )
        })
        .collect();
    let noise: Vec<f64> = (0..(width * height))
        .map(|_| rng.random_range(-12.0..12.0))
        .collect();
    RasterImage::from_fn(width, height, |x, y| {
        let shade = 0.7 + 0.3 * (y as f64 / height as f64);
        let mut c = bg.map(|v| v * shade);
        for &(cx, cy, r, color) in &blobs {
            if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) < r * r {
                c = color;
            }
        }
        let n = noise[(y * width + x) as usize];
        c.map(|v| (v + n).clamp(0.0, 255.0) as u8)
    })
}

/// Writes `n` images over the first `classes` class directories, mildly
/// skewed so balancing has work to do.
pub fn write_corpus(
    root: &Path,
    n: usize,
    classes: usize,
    seed: u64,
) -> BTreeMap<ClassLabel, usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<usize> = (0..classes).map(|i| 3 * classes + 2 * i).collect();
    let total: usize = weights.iter().sum();
    let mut counts: Vec<usize> = weights.iter().map(|w| (n * w / total).max(1)).collect();
    let mut i = 0;
    while counts.iter().sum::<usize>() < n {
        counts[i % classes] += 1;
        i += 1;
    }
    let mut out = BTreeMap::new();
    for (class, &count) in ClassLabel::ALL.iter().zip(&counts) {
        for i in 0..count {
            let w = rng.random_range(60..180);
            let h = rng.random_range(60..180);
            let img = synthetic_photo(&mut rng, w, h);
            save_image(
                &img,
                root.join(class.name()).join(format!("img_{i:03}.png")),
            )
            .unwrap();
        }
        out.insert(*class, count);
    }
    out
}

pub fn wildprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wildprep"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Every file under `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(base).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
