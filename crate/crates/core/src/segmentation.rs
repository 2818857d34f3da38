//! K-means color segmentation.
//!
//! Pixels are clustered in raw RGB with squared Euclidean distance. The
//! label map is then mode-filtered to remove speckle and every pixel is
//! painted with its cluster's centroid color, so a segmented image holds at
//! most `k` colors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{PixelVec, RasterImage};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_DENOISE_WINDOW: usize = 3;
pub const DEFAULT_N_INIT: usize = 10;
/// Labels are stored as bytes.
pub const MAX_K: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// D²-weighted seeding.
    #[default]
    PlusPlus,
    /// `k` distinct pixels drawn uniformly.
    Forgy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once no centroid moves by this many intensity units or more.
    pub tol: f64,
    pub seed: u64,
    pub init: InitScheme,
    /// Independent initializations; the lowest-inertia run is kept.
    pub n_init: usize,
    /// Polish each Lloyd fixed point with single-pixel moves.
    pub refine: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed: 0,
            init: InitScheme::PlusPlus,
            n_init: DEFAULT_N_INIT,
            refine: true,
        }
    }
}

impl KMeansConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_K {
            return Err(Error::InvalidArgument(format!(
                "k must be in 1..={MAX_K}, got {}",
                self.k
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.n_init == 0 {
            return Err(Error::InvalidArgument("n_init must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be a positive finite number, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    centroids: Vec<PixelVec>,
}

impl KMeansModel {
    pub fn new(centroids: Vec<PixelVec>) -> Result<Self> {
        if centroids.is_empty() || centroids.len() > MAX_K {
            return Err(Error::InvalidArgument(format!(
                "model needs 1..={MAX_K} centroids, got {}",
                centroids.len()
            )));
        }
        if let Some(bad) = centroids.iter().find(|c| !c.is_valid()) {
            return Err(Error::InvalidArgument(format!(
                "centroid {bad:?} outside [0, 255]"
            )));
        }
        Ok(Self { centroids })
    }

    pub fn centroids(&self) -> &[PixelVec] {
        &self.centroids
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

/// Per-pixel cluster indices in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "label map {width}x{height} cannot hold {} labels",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }
}

/// Raster painted with centroid colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedImage(RasterImage);

impl SegmentedImage {
    pub fn image(&self) -> &RasterImage {
        &self.0
    }

    pub fn into_image(self) -> RasterImage {
        self.0
    }
}

/// Everything a Lloyd run produced, including the per-iteration objective.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub model: KMeansModel,
    pub labels: LabelMap,
    /// Inertia after each assignment step, the final assignment included.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        *self.inertia_trace.last().expect("trace is never empty")
    }
}

/// Fits `config.k` centroids with Lloyd's algorithm and returns them with the
/// nearest-centroid labels.
pub fn kmeans_fit(img: &RasterImage, config: &KMeansConfig) -> Result<(KMeansModel, LabelMap)> {
    let fit = kmeans_fit_traced(img, config)?;
    Ok((fit.model, fit.labels))
}

/// Like [`kmeans_fit`], also returning the inertia trace of the kept run.
///
/// Each of `config.n_init` runs seeds its centroids from stream `r` of the
/// configured seed, then alternates nearest-centroid assignment and mean
/// updates until no centroid moves by `tol` or more. With `refine`, a
/// converged partition is polished by moving single pixels to whichever
/// cluster lowers the exact objective, and Lloyd iterations resume from the
/// polished means. Every step is non-increasing in inertia.
pub fn kmeans_fit_traced(img: &RasterImage, config: &KMeansConfig) -> Result<KMeansFit> {
    config.validate()?;
    let n = img.pixel_count();
    if n < config.k {
        return Err(Error::TooFewPixels {
            pixels: n,
            k: config.k,
        });
    }
    let pixels: Vec<[u8; 3]> = img.pixels().collect();
    let feats: Vec<PixelVec> = pixels.iter().map(|&p| PixelVec::from_rgb(p)).collect();

    let mut best: Option<KMeansFit> = None;
    for run in 0..config.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(run as u64);
        let fit = fit_once(img, &pixels, &feats, config, &mut rng)?;
        if best.as_ref().is_none_or(|b| fit.inertia() < b.inertia()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Integer cluster sums, so means and move costs are exact.
struct Partition {
    sums: Vec<[u64; 3]>,
    counts: Vec<usize>,
}

impl Partition {
    fn from_labels(pixels: &[[u8; 3]], labels: &[u8], k: usize) -> Self {
        let mut sums = vec![[0u64; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pixels.iter().zip(labels) {
            let s = &mut sums[l as usize];
            s[0] += p[0] as u64;
            s[1] += p[1] as u64;
            s[2] += p[2] as u64;
            counts[l as usize] += 1;
        }
        Self { sums, counts }
    }

    fn mean(&self, j: usize) -> PixelVec {
        let c = self.counts[j] as f64;
        let s = self.sums[j];
        PixelVec::new(s[0] as f64 / c, s[1] as f64 / c, s[2] as f64 / c)
    }

    fn shift(&mut self, p: [u8; 3], from: usize, to: usize) {
        for (c, &v) in p.iter().enumerate() {
            self.sums[from][c] -= v as u64;
            self.sums[to][c] += v as u64;
        }
        self.counts[from] -= 1;
        self.counts[to] += 1;
    }

    /// `|count * p - sum|²`, i.e. `count²` times the squared distance from
    /// `p` to the cluster mean.
    fn scaled_dist2(&self, p: [u8; 3], j: usize) -> u128 {
        let n = self.counts[j] as i128;
        (0..3)
            .map(|c| {
                let d = n * p[c] as i128 - self.sums[j][c] as i128;
                (d * d) as u128
            })
            .sum()
    }
}

fn fit_once(
    img: &RasterImage,
    pixels: &[[u8; 3]],
    feats: &[PixelVec],
    config: &KMeansConfig,
    rng: &mut ChaCha8Rng,
) -> Result<KMeansFit> {
    let k = config.k;
    let mut centroids = match config.init {
        InitScheme::PlusPlus => init_plus_plus(feats, k, rng)?,
        InitScheme::Forgy => init_forgy(pixels, k, rng)?,
    };

    let mut labels = vec![0u8; pixels.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let converged = loop {
        let mut settled = false;
        while iterations < config.max_iters {
            trace.push(assign_into(feats, &centroids, &mut labels));
            let mut part = Partition::from_labels(pixels, &labels, k);
            repair_empty_clusters(pixels, feats, &centroids, &mut labels, &mut part);
            let mut shift = 0.0f64;
            for (j, c) in centroids.iter_mut().enumerate() {
                let next = part.mean(j);
                shift = shift.max(next.dist2(c).sqrt());
                *c = next;
            }
            iterations += 1;
            if shift < config.tol {
                settled = true;
                break;
            }
        }
        if !settled || !config.refine {
            break settled;
        }
        trace.push(assign_into(feats, &centroids, &mut labels));
        let mut part = Partition::from_labels(pixels, &labels, k);
        repair_empty_clusters(pixels, feats, &centroids, &mut labels, &mut part);
        if !refine_single_moves(pixels, &mut labels, &mut part, config.max_iters) {
            break true;
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            *c = part.mean(j);
        }
        trace.push(
            feats
                .iter()
                .zip(&labels)
                .map(|(p, &l)| p.dist2(&centroids[l as usize]))
                .sum(),
        );
    };
    trace.push(assign_into(feats, &centroids, &mut labels));

    Ok(KMeansFit {
        model: KMeansModel { centroids },
        labels: LabelMap {
            width: img.width(),
            height: img.height(),
            labels,
        },
        inertia_trace: trace,
        iterations,
        converged,
    })
}

/// Sweeps the pixels, moving each to the cluster that most lowers the
/// objective. Leaving cluster `a` saves `|p - m_a|² n_a / (n_a - 1)`;
/// joining `b` costs `|p - m_b|² n_b / (n_b + 1)`. Both sides are compared
/// as exact integer fractions. Returns whether anything moved.
fn refine_single_moves(
    pixels: &[[u8; 3]],
    labels: &mut [u8],
    part: &mut Partition,
    max_sweeps: usize,
) -> bool {
    let k = part.counts.len();
    let mut any = false;
    for _ in 0..max_sweeps {
        let mut moved = false;
        for (i, &p) in pixels.iter().enumerate() {
            let a = labels[i] as usize;
            let na = part.counts[a] as u128;
            if na < 2 {
                continue;
            }
            // saving as a fraction: num / den
            let (save_num, save_den) = (part.scaled_dist2(p, a), na * (na - 1));
            let mut best: Option<(usize, u128, u128)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = part.counts[b] as u128;
                let (num, den) = (part.scaled_dist2(p, b), nb * (nb + 1));
                if best.is_none_or(|(_, bn, bd)| num * bd < bn * den) {
                    best = Some((b, num, den));
                }
            }
            if let Some((b, num, den)) = best {
                if num * save_den < save_num * den {
                    part.shift(p, a, b);
                    labels[i] = b as u8;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
        any = true;
    }
    any
}

fn init_plus_plus(feats: &[PixelVec], k: usize, rng: &mut impl Rng) -> Result<Vec<PixelVec>> {
    let n = feats.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(feats[rng.random_range(0..n)]);
    let mut nearest: Vec<f64> = feats.iter().map(|p| p.dist2(&centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let sampler = WeightedIndex::new(&nearest).expect("weights are finite and non-zero");
            feats[sampler.sample(rng)]
        } else {
            // every pixel already coincides with a centroid
            let distinct = centroids.len();
            return Err(Error::TooFewColors { distinct, k });
        };
        for (d, p) in nearest.iter_mut().zip(feats) {
            *d = d.min(p.dist2(&next));
        }
        centroids.push(next);
    }
    Ok(centroids)
}

fn init_forgy(pixels: &[[u8; 3]], k: usize, rng: &mut impl Rng) -> Result<Vec<PixelVec>> {
    let mut palette: Vec<[u8; 3]> = pixels.to_vec();
    palette.sort_unstable();
    palette.dedup();
    if palette.len() < k {
        return Err(Error::TooFewColors {
            distinct: palette.len(),
            k,
        });
    }
    let picks = rand::seq::index::sample(rng, palette.len(), k);
    Ok(picks
        .iter()
        .map(|i| PixelVec::from_rgb(palette[i]))
        .collect())
}

/// Nearest-centroid assignment with ties going to the lowest index. Returns
/// the inertia of the new assignment.
fn assign_into(feats: &[PixelVec], centroids: &[PixelVec], labels: &mut [u8]) -> f64 {
    let mut total = 0.0;
    for (p, slot) in feats.iter().zip(labels.iter_mut()) {
        let (best, d) = nearest_centroid(p, centroids);
        *slot = best as u8;
        total += d;
    }
    total
}

#[inline]
fn nearest_centroid(p: &PixelVec, centroids: &[PixelVec]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = p.dist2(&centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = p.dist2(c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Moves the pixel farthest from its centroid into each empty cluster. Donor
/// clusters must keep at least one member.
fn repair_empty_clusters(
    pixels: &[[u8; 3]],
    feats: &[PixelVec],
    centroids: &[PixelVec],
    labels: &mut [u8],
    part: &mut Partition,
) {
    for empty in 0..part.counts.len() {
        if part.counts[empty] != 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in feats.iter().enumerate() {
            let l = labels[i] as usize;
            if part.counts[l] < 2 {
                continue;
            }
            let d = p.dist2(&centroids[l]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else {
            // n >= k guarantees a donor with two members exists
            unreachable!("no donor for empty cluster {empty}");
        };
        part.shift(pixels[i], labels[i] as usize, empty);
        labels[i] = empty as u8;
    }
}

/// Maps every pixel to its nearest centroid; ties go to the lowest index.
pub fn assign_labels(img: &RasterImage, model: &KMeansModel) -> LabelMap {
    let labels = img
        .pixels()
        .map(|p| nearest_centroid(&PixelVec::from_rgb(p), &model.centroids).0 as u8)
        .collect();
    LabelMap {
        width: img.width(),
        height: img.height(),
        labels,
    }
}

/// Sum of squared distances from each pixel to its assigned centroid.
pub fn inertia(img: &RasterImage, model: &KMeansModel, labels: &LabelMap) -> Result<f64> {
    check_dims(img, labels)?;
    let mut total = 0.0;
    for (p, &l) in img.pixels().zip(&labels.labels) {
        let c = model
            .centroids
            .get(l as usize)
            .ok_or(Error::LabelOutOfRange {
                label: l as usize,
                k: model.k(),
            })?;
        total += PixelVec::from_rgb(p).dist2(c);
    }
    Ok(total)
}

fn check_dims(img: &RasterImage, labels: &LabelMap) -> Result<()> {
    if img.width() != labels.width || img.height() != labels.height {
        return Err(Error::DimensionMismatch {
            image_w: img.width(),
            image_h: img.height(),
            labels_w: labels.width,
            labels_h: labels.height,
        });
    }
    Ok(())
}

/// Mode filter over a `window`x`window` neighborhood truncated at the
/// borders. Ties keep the center label if it is among the modes, otherwise
/// the lowest tied label wins.
pub fn denoise_labels(labels: &LabelMap, window: usize) -> Result<LabelMap> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "denoise window must be odd and >= 3, got {window}"
        )));
    }
    let r = (window / 2) as i64;
    let (w, h) = (labels.width as i64, labels.height as i64);
    let mut counts = [0u32; MAX_K];
    let mut touched: Vec<u8> = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(labels.labels.len());
    for y in 0..h {
        for x in 0..w {
            for ny in (y - r).max(0)..=(y + r).min(h - 1) {
                for nx in (x - r).max(0)..=(x + r).min(w - 1) {
                    let l = labels.labels[(ny * w + nx) as usize];
                    if counts[l as usize] == 0 {
                        touched.push(l);
                    }
                    counts[l as usize] += 1;
                }
            }
            let center = labels.labels[(y * w + x) as usize];
            let top = touched
                .iter()
                .map(|&l| counts[l as usize])
                .max()
                .unwrap_or(0);
            let chosen = if counts[center as usize] == top {
                center
            } else {
                touched
                    .iter()
                    .copied()
                    .filter(|&l| counts[l as usize] == top)
                    .min()
                    .expect("window is non-empty")
            };
            for &l in &touched {
                counts[l as usize] = 0;
            }
            touched.clear();
            out.push(chosen);
        }
    }
    Ok(LabelMap {
        width: labels.width,
        height: labels.height,
        labels: out,
    })
}

/// Paints each pixel with its label's centroid, rounded half-up to 8 bits.
pub fn recolor(labels: &LabelMap, model: &KMeansModel) -> Result<SegmentedImage> {
    let palette: Vec<[u8; 3]> = model.centroids.iter().map(PixelVec::to_rgb).collect();
    let mut data = Vec::with_capacity(labels.labels.len() * 3);
    for &l in &labels.labels {
        let rgb = palette.get(l as usize).ok_or(Error::LabelOutOfRange {
            label: l as usize,
            k: palette.len(),
        })?;
        data.extend_from_slice(rgb);
    }
    Ok(SegmentedImage(RasterImage::new(
        labels.width,
        labels.height,
        data,
    )?))
}

/// Fit, mode-filter and recolor with the default 3x3 window.
pub fn segment_image(img: &RasterImage, config: &KMeansConfig) -> Result<SegmentedImage> {
    segment_image_with_window(img, config, DEFAULT_DENOISE_WINDOW)
}

/// Images with fewer distinct colors than `config.k` are fitted with one
/// cluster per distinct color instead of failing.
pub fn segment_image_with_window(
    img: &RasterImage,
    config: &KMeansConfig,
    window: usize,
) -> Result<SegmentedImage> {
    config.validate()?;
    let distinct = img.distinct_colors(config.k);
    let effective = if distinct < config.k {
        KMeansConfig {
            k: distinct,
            ..config.clone()
        }
    } else {
        config.clone()
    };
    let (model, labels) = kmeans_fit(img, &effective)?;
    let labels = denoise_labels(&labels, window)?;
    recolor(&labels, &model)
}
