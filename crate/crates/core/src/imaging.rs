//! RGB rasters, PNG/JPEG codecs and bilinear resampling.
//!
//! Every imaging operation in the crate works on [`RasterImage`], a packed
//! row-major `RGBRGB...` buffer. Decoding normalizes grayscale and alpha
//! sources to three channels so downstream stages never branch on layout.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "raster dimensions must be >= 1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "raster {width}x{height} needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Uniform image. Panics on a zero dimension.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image by evaluating `f(x, y)` in row-major order. Panics on a
    /// zero dimension.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(CHANNELS).map(|p| [p[0], p[1], p[2]])
    }

    /// Number of distinct colors, stopping early once `limit` is exceeded.
    pub fn distinct_colors(&self, limit: usize) -> usize {
        let mut seen = std::collections::HashSet::new();
        for p in self.pixels() {
            seen.insert(p);
            if seen.len() > limit {
                break;
            }
        }
        seen.len()
    }

    /// Copies the `w`x`h` rectangle whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w as usize * h as usize * CHANNELS);
        let row = self.width as usize * CHANNELS;
        for y in y0..y0 + h {
            let start = y as usize * row + x0 as usize * CHANNELS;
            data.extend_from_slice(&self.data[start..start + w as usize * CHANNELS]);
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }
}

/// Real-valued RGB triple used as the clustering feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelVec {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl PixelVec {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub fn from_rgb(rgb: [u8; 3]) -> Self {
        Self::new(rgb[0] as f64, rgb[1] as f64, rgb[2] as f64)
    }

    #[inline]
    pub fn dist2(&self, other: &PixelVec) -> f64 {
        let dr = self.r - other.r;
        let dg = self.g - other.g;
        let db = self.b - other.b;
        dr * dr + dg * dg + db * db
    }

    /// Round half-up to the nearest 8-bit value per channel.
    pub fn to_rgb(&self) -> [u8; 3] {
        [
            round_half_up_u8(self.r),
            round_half_up_u8(self.g),
            round_half_up_u8(self.b),
        ]
    }

    pub fn is_valid(&self) -> bool {
        [self.r, self.g, self.b]
            .iter()
            .all(|c| c.is_finite() && (0.0..=255.0).contains(c))
    }
}

#[inline]
pub(crate) fn round_half_up_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Decodes a JPEG or PNG file into an RGB raster. Grayscale is replicated
/// across channels and alpha is discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::NotFound {
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    if bytes.is_empty() {
        return Err(Error::Undecodable {
            path: path.to_path_buf(),
            reason: "empty file".into(),
        });
    }
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if decoded.width() == 0 || decoded.height() == 0 {
        return Err(Error::EmptyImage {
            path: path.to_path_buf(),
        });
    }
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    RasterImage::new(w, h, rgb.into_raw())
}

/// Reads only the header to check that `path` holds a non-empty JPEG or PNG.
pub fn probe_image(path: impl AsRef<Path>) -> Result<(u32, u32)> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| match e.kind() {
            ErrorKind::NotFound => Error::NotFound {
                path: path.to_path_buf(),
            },
            _ => Error::io(path, e),
        })?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let (w, h) = reader.into_dimensions().map_err(|e| Error::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage {
            path: path.to_path_buf(),
        });
    }
    Ok((w, h))
}

/// Encodes `img` as PNG. The encoder settings are fixed so identical rasters
/// always produce identical bytes.
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&img.data, img.width, img.height, ExtendedColorType::Rgb8)
        .map_err(|e| Error::Encode {
            path: Default::default(),
            reason: e.to_string(),
        })?;
    Ok(out)
}

/// Writes `img` as a lossless PNG, creating missing parent directories.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let bytes = encode_png(img).map_err(|e| match e {
        Error::Encode { reason, .. } => Error::Encode {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Bilinear sample at continuous pixel-index coordinates `(sx, sy)`, where
/// integer coordinates hit pixel centers. Coordinates outside the frame are
/// clamped, which replicates the nearest edge.
#[inline]
pub(crate) fn sample_bilinear(img: &RasterImage, sx: f64, sy: f64) -> [u8; 3] {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);

    let p00 = img.pixel(x0, y0);
    let p10 = img.pixel(x1, y0);
    let p01 = img.pixel(x0, y1);
    let p11 = img.pixel(x1, y1);
    let mut out = [0u8; 3];
    for c in 0..CHANNELS {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = round_half_up_u8(top * (1.0 - fy) + bottom * fy);
    }
    out
}

/// Bilinear resize with half-pixel centers. Resizing to the source
/// dimensions returns the input unchanged.
pub fn resize(img: &RasterImage, target_w: u32, target_h: u32) -> Result<RasterImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be >= 1, got {target_w}x{target_h}"
        )));
    }
    if target_w == img.width && target_h == img.height {
        return Ok(img.clone());
    }
    let scale_x = img.width as f64 / target_w as f64;
    let scale_y = img.height as f64 / target_h as f64;
    let xs: Vec<f64> = (0..target_w)
        .map(|x| (x as f64 + 0.5) * scale_x - 0.5)
        .collect();
    let mut data = Vec::with_capacity(target_w as usize * target_h as usize * CHANNELS);
    for y in 0..target_h {
        let sy = (y as f64 + 0.5) * scale_y - 0.5;
        for &sx in &xs {
            data.extend_from_slice(&sample_bilinear(img, sx, sy));
        }
    }
    RasterImage::new(target_w, target_h, data)
}
