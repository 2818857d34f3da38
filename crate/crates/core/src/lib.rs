//! Dataset preparation for class-per-directory wild-animal photo corpora.
//!
//! The pipeline resizes each photo to a square working size, segments it
//! into `k` flat color regions with k-means, oversamples minority classes
//! with seeded geometric augmentation chains, and assigns a stratified
//! train/test split and k-fold plan. Everything lands in a PNG tree plus a
//! `manifest.jsonl` ledger; the same seed always produces the same bytes.

pub mod augmentation;
pub mod dataset;
pub mod error;
pub mod imaging;
pub mod pipeline;
pub mod segmentation;

pub use error::{Error, Result};
pub use imaging::{load_image, resize, save_image, PixelVec, RasterImage};
