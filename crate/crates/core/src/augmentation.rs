//! Geometric augmentation: flips, rotations and center zoom.
//!
//! Chains are drawn from a seeded RNG and serialize to compact strings such
//! as `["flip_h","rot:12.5","zoom:1.20"]`. Sampled parameters are quantized
//! to the serialized precision, so a chain parsed back from a manifest
//! reproduces the same pixels as the chain that was drawn.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::imaging::{resize, sample_bilinear, RasterImage};

pub const MAX_ANGLE_DEGREES: f64 = 15.0;
pub const MIN_ZOOM: f64 = 1.0;
pub const MAX_ZOOM: f64 = 1.3;
pub const MAX_CHAIN_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentOp {
    FlipH,
    FlipV,
    Rotate90,
    Rotate180,
    Rotate270,
    /// Counter-clockwise degrees in `[-15, 15]`.
    RotateAngle(f64),
    /// Magnification in `[1.0, 1.3]`.
    Zoom(f64),
}

impl AugmentOp {
    /// Number of distinct variants, the parameterized ones counted once.
    pub const VARIANTS: usize = 7;

    pub fn variant_index(&self) -> usize {
        match self {
            AugmentOp::FlipH => 0,
            AugmentOp::FlipV => 1,
            AugmentOp::Rotate90 => 2,
            AugmentOp::Rotate180 => 3,
            AugmentOp::Rotate270 => 4,
            AugmentOp::RotateAngle(_) => 5,
            AugmentOp::Zoom(_) => 6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AugmentOp::RotateAngle(d) if !(d.is_finite() && d.abs() <= MAX_ANGLE_DEGREES) => Err(
                Error::InvalidArgument(format!("rotation {d} outside [-15, 15] degrees")),
            ),
            AugmentOp::Zoom(f) if !(MIN_ZOOM..=MAX_ZOOM).contains(&f) => Err(
                Error::InvalidArgument(format!("zoom factor {f} outside [1.0, 1.3]")),
            ),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, img: &RasterImage) -> Result<RasterImage> {
        Ok(match *self {
            AugmentOp::FlipH => flip_h(img),
            AugmentOp::FlipV => flip_v(img),
            AugmentOp::Rotate90 => rotate_right_angle(img, 1)?,
            AugmentOp::Rotate180 => rotate_right_angle(img, 2)?,
            AugmentOp::Rotate270 => rotate_right_angle(img, 3)?,
            AugmentOp::RotateAngle(d) => rotate_angle(img, d)?,
            AugmentOp::Zoom(f) => zoom(img, f)?,
        })
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AugmentOp::FlipH => f.write_str("flip_h"),
            AugmentOp::FlipV => f.write_str("flip_v"),
            AugmentOp::Rotate90 => f.write_str("rot90"),
            AugmentOp::Rotate180 => f.write_str("rot180"),
            AugmentOp::Rotate270 => f.write_str("rot270"),
            // adding 0.0 turns -0.0 into 0.0
            AugmentOp::RotateAngle(d) => write!(f, "rot:{:.1}", d + 0.0),
            AugmentOp::Zoom(z) => write!(f, "zoom:{z:.2}"),
        }
    }
}

impl FromStr for AugmentOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let op = match s {
            "flip_h" => AugmentOp::FlipH,
            "flip_v" => AugmentOp::FlipV,
            "rot90" => AugmentOp::Rotate90,
            "rot180" => AugmentOp::Rotate180,
            "rot270" => AugmentOp::Rotate270,
            _ => {
                let parse = |v: &str| v.parse::<f64>().map_err(|_| Error::InvalidOp(s.into()));
                if let Some(v) = s.strip_prefix("rot:") {
                    AugmentOp::RotateAngle(parse(v)?)
                } else if let Some(v) = s.strip_prefix("zoom:") {
                    AugmentOp::Zoom(parse(v)?)
                } else {
                    return Err(Error::InvalidOp(s.into()));
                }
            }
        };
        op.validate().map_err(|_| Error::InvalidOp(s.into()))?;
        Ok(op)
    }
}

/// Ordered list of one to three ops.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentChain {
    ops: Vec<AugmentOp>,
}

impl AugmentChain {
    pub fn new(ops: Vec<AugmentOp>) -> Result<Self> {
        if ops.is_empty() || ops.len() > MAX_CHAIN_LEN {
            return Err(Error::InvalidArgument(format!(
                "chain length must be 1..={MAX_CHAIN_LEN}, got {}",
                ops.len()
            )));
        }
        for op in &ops {
            op.validate()?;
        }
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[AugmentOp] {
        &self.ops
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.ops.iter().map(ToString::to_string).collect()
    }

    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        let ops = items
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

impl Serialize for AugmentChain {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AugmentChain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<String>::deserialize(deserializer)?;
        AugmentChain::parse(&items).map_err(serde::de::Error::custom)
    }
}

/// Mirror across the vertical axis.
pub fn flip_h(img: &RasterImage) -> RasterImage {
    let w = img.width();
    RasterImage::from_fn(w, img.height(), |x, y| img.pixel(w - 1 - x, y))
}

/// Mirror across the horizontal axis.
pub fn flip_v(img: &RasterImage) -> RasterImage {
    let h = img.height();
    RasterImage::from_fn(img.width(), h, |x, y| img.pixel(x, h - 1 - y))
}

/// Clockwise rotation by `quarter_turns` x 90 degrees. Odd turns swap the
/// dimensions.
pub fn rotate_right_angle(img: &RasterImage, quarter_turns: u8) -> Result<RasterImage> {
    let (w, h) = (img.width(), img.height());
    Ok(match quarter_turns {
        1 => RasterImage::from_fn(h, w, |x, y| img.pixel(y, h - 1 - x)),
        2 => RasterImage::from_fn(w, h, |x, y| img.pixel(w - 1 - x, h - 1 - y)),
        3 => RasterImage::from_fn(h, w, |x, y| img.pixel(w - 1 - y, x)),
        q => {
            return Err(Error::InvalidArgument(format!(
                "quarter turns must be 1, 2 or 3, got {q}"
            )))
        }
    })
}

/// Counter-clockwise rotation about the image center with bilinear sampling.
/// Samples that fall outside the frame replicate the nearest edge.
pub fn rotate_angle(img: &RasterImage, degrees: f64) -> Result<RasterImage> {
    AugmentOp::RotateAngle(degrees).validate()?;
    if degrees == 0.0 {
        return Ok(img.clone());
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    Ok(RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        // y grows downward, so a visual counter-clockwise turn maps the
        // output back to the source with this inverse
        let sx = cx + dx * cos - dy * sin;
        let sy = cy + dx * sin + dy * cos;
        sample_bilinear(img, sx, sy)
    }))
}

/// Center crop of `1/factor` of each dimension, resized back to the input
/// size.
pub fn zoom(img: &RasterImage, factor: f64) -> Result<RasterImage> {
    AugmentOp::Zoom(factor).validate()?;
    zoom_unchecked(img, factor)
}

pub(crate) fn zoom_unchecked(img: &RasterImage, factor: f64) -> Result<RasterImage> {
    let (w, h) = (img.width(), img.height());
    let cw = ((w as f64 / factor).round() as u32).clamp(1, w);
    let ch = ((h as f64 / factor).round() as u32).clamp(1, h);
    let cropped = img.crop((w - cw) / 2, (h - ch) / 2, cw, ch)?;
    resize(&cropped, w, h)
}

/// Applies the ops left to right, then resizes back to the input size if odd
/// quarter-turns left the dimensions swapped.
pub fn apply_chain(img: &RasterImage, chain: &AugmentChain) -> Result<RasterImage> {
    let mut cur = img.clone();
    for op in &chain.ops {
        cur = op.apply(&cur)?;
    }
    if (cur.width(), cur.height()) != (img.width(), img.height()) {
        cur = resize(&cur, img.width(), img.height())?;
    }
    Ok(cur)
}

/// Parameter ranges for [`sample_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub max_angle: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
    pub max_chain_len: usize,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            max_angle: MAX_ANGLE_DEGREES,
            zoom_min: MIN_ZOOM,
            zoom_max: MAX_ZOOM,
            max_chain_len: MAX_CHAIN_LEN,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_angle >= 0.0 && self.max_angle <= MAX_ANGLE_DEGREES) {
            return Err(Error::InvalidArgument(format!(
                "max_angle must be in [0, 15], got {}",
                self.max_angle
            )));
        }
        if !(MIN_ZOOM <= self.zoom_min
            && self.zoom_min <= self.zoom_max
            && self.zoom_max <= MAX_ZOOM)
        {
            return Err(Error::InvalidArgument(format!(
                "zoom range [{}, {}] must lie within [1.0, 1.3]",
                self.zoom_min, self.zoom_max
            )));
        }
        if self.max_chain_len == 0 || self.max_chain_len > MAX_CHAIN_LEN {
            return Err(Error::InvalidArgument(format!(
                "max_chain_len must be 1..={MAX_CHAIN_LEN}, got {}",
                self.max_chain_len
            )));
        }
        Ok(())
    }
}

/// RNG for the sample at `index` of a run seeded with `seed`. Streams depend
/// only on the pair, never on scheduling order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index)
}

/// Draws a chain: length uniform in `1..=max_chain_len`, each op uniform over
/// the seven variants, parameters uniform in their ranges and quantized to
/// 0.1 degree / 0.01 zoom.
pub fn sample_chain(rng: &mut impl Rng, policy: &AugmentPolicy) -> AugmentChain {
    let len = rng.random_range(1..=policy.max_chain_len);
    let ops = (0..len)
        .map(|_| match rng.random_range(0..AugmentOp::VARIANTS) {
            0 => AugmentOp::FlipH,
            1 => AugmentOp::FlipV,
            2 => AugmentOp::Rotate90,
            3 => AugmentOp::Rotate180,
            4 => AugmentOp::Rotate270,
            5 => {
                let a = rng.random_range(-policy.max_angle..=policy.max_angle);
                AugmentOp::RotateAngle((a * 10.0).round() / 10.0 + 0.0)
            }
            _ => {
                let z = rng.random_range(policy.zoom_min..=policy.zoom_max);
                AugmentOp::Zoom(
                    ((z * 100.0).round() / 100.0).clamp(policy.zoom_min, policy.zoom_max),
                )
            }
        })
        .collect();
    AugmentChain { ops }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(rng: &mut impl Rng, w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn flip_h_two_pixels() {
        let img = RasterImage::from_fn(2, 1, |x, _| if x == 0 { [1, 1, 1] } else { [2, 2, 2] });
        let out = flip_h(&img);
        assert_eq!(out.pixel(0, 0), [2, 2, 2]);
        assert_eq!(out.pixel(1, 0), [1, 1, 1]);
    }

    #[test]
    fn quarter_turn_moves_corners_clockwise() {
        // A B
        // C D  -> clockwise ->  C A
        //                       D B
        let (a, b, c, d) = ([1, 0, 0], [2, 0, 0], [3, 0, 0], [4, 0, 0]);
        let img = RasterImage::from_fn(2, 2, |x, y| match (x, y) {
            (0, 0) => a,
            (1, 0) => b,
            (0, 1) => c,
            _ => d,
        });
        let r = rotate_right_angle(&img, 1).unwrap();
        assert_eq!(
            [r.pixel(0, 0), r.pixel(1, 0), r.pixel(0, 1), r.pixel(1, 1)],
            [c, a, d, b]
        );
        let r = rotate_right_angle(&img, 2).unwrap();
        assert_eq!(
            [r.pixel(0, 0), r.pixel(1, 0), r.pixel(0, 1), r.pixel(1, 1)],
            [d, c, b, a]
        );
        let r = rotate_right_angle(&img, 3).unwrap();
        assert_eq!(
            [r.pixel(0, 0), r.pixel(1, 0), r.pixel(0, 1), r.pixel(1, 1)],
            [b, d, a, c]
        );
        assert!(rotate_right_angle(&img, 0).is_err());
        assert!(rotate_right_angle(&img, 4).is_err());
    }

    #[test]
    fn quarter_turn_swaps_dimensions() {
        let img = RasterImage::filled(5, 3, [0, 0, 0]);
        let r = rotate_right_angle(&img, 1).unwrap();
        assert_eq!((r.width(), r.height()), (3, 5));
    }

    #[test]
    fn rotate_angle_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_image(&mut rng, 7, 4);
        assert_eq!(rotate_angle(&img, 0.0).unwrap(), img);
        assert_eq!(rotate_angle(&img, -0.0).unwrap(), img);
    }

    #[test]
    fn rotate_angle_range_checked() {
        let img = RasterImage::filled(3, 3, [1, 2, 3]);
        assert!(rotate_angle(&img, 15.0).is_ok());
        assert!(rotate_angle(&img, -15.0).is_ok());
        assert!(rotate_angle(&img, 15.01).is_err());
        assert!(rotate_angle(&img, f64::NAN).is_err());
    }

    /// Inverse-mapping rotation written from scratch: for each destination
    /// pixel, rotate its offset from the center by -theta in a y-up frame and
    /// sample the source bilinearly with clamped coordinates.
    fn oracle_rotate(img: &RasterImage, degrees: f64) -> Vec<[f64; 3]> {
        let t = -degrees * std::f64::consts::PI / 180.0;
        let (w, h) = (img.width() as f64, img.height() as f64);
        let (cx, cy) = ((w - 1.0) * 0.5, (h - 1.0) * 0.5);
        let mut out = Vec::new();
        for y in 0..img.height() {
            for x in 0..img.width() {
                // y-up coordinates
                let u = x as f64 - cx;
                let v = cy - y as f64;
                let su = u * t.cos() - v * t.sin();
                let sv = u * t.sin() + v * t.cos();
                let sx = (su + cx).max(0.0).min(w - 1.0);
                let sy = (cy - sv).max(0.0).min(h - 1.0);
                let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
                let (x1, y1) = (
                    (x0 + 1).min(img.width() - 1),
                    (y0 + 1).min(img.height() - 1),
                );
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                let mut px = [0.0; 3];
                for (c, slot) in px.iter_mut().enumerate() {
                    *slot = img.pixel(x0, y0)[c] as f64 * (1.0 - fx) * (1.0 - fy)
                        + img.pixel(x1, y0)[c] as f64 * fx * (1.0 - fy)
                        + img.pixel(x0, y1)[c] as f64 * (1.0 - fx) * fy
                        + img.pixel(x1, y1)[c] as f64 * fx * fy;
                }
                out.push(px);
            }
        }
        out
    }

    #[test]
    fn rotate_angle_matches_inverse_mapping_oracle() {
        let img = RasterImage::from_fn(5, 5, |x, y| {
            [(x * 50) as u8, (y * 50) as u8, (x * 20 + y * 25) as u8]
        });
        for degrees in [10.0, -10.0, 3.3, 15.0] {
            let got = rotate_angle(&img, degrees).unwrap();
            for (p, want) in got.pixels().zip(oracle_rotate(&img, degrees)) {
                for c in 0..3 {
                    assert!(
                        (p[c] as f64 - want[c]).abs() <= 1.0,
                        "{degrees} deg: {p:?} vs {want:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn rotate_angle_turns_counter_clockwise() {
        // a bright pixel right of center moves up under a positive angle
        let mut img = RasterImage::filled(41, 41, [0, 0, 0]);
        img.set_pixel(35, 20, [255, 255, 255]);
        let out = rotate_angle(&img, 15.0).unwrap();
        let (bx, by) = (0..41)
            .flat_map(|y| (0..41).map(move |x| (x, y)))
            .max_by_key(|&(x, y)| out.pixel(x, y)[0])
            .unwrap();
        assert!(by < 20 && bx > 30, "brightest at ({bx}, {by})");
    }

    #[test]
    fn zoom_identity_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = random_image(&mut rng, 9, 6);
        assert_eq!(zoom(&img, 1.0).unwrap(), img);
        assert!(zoom(&img, 0.99).is_err());
        assert!(zoom(&img, 1.31).is_err());
        assert!(zoom(&img, 1.3).is_ok());
    }

    #[test]
    fn zoom_factor_two_is_center_crop_upsampled() {
        let img = RasterImage::from_fn(4, 4, |x, y| [(x * 80) as u8, (y * 80) as u8, 0]);
        let got = zoom_unchecked(&img, 2.0).unwrap();
        // crop oracle: central 2x2 starts at (1, 1)
        let crop =
            |x: i64, y: i64| img.pixel((x.clamp(0, 1) + 1) as u32, (y.clamp(0, 1) + 1) as u32);
        for y in 0..4u32 {
            for x in 0..4u32 {
                // resize oracle: 2 -> 4 maps output center x+0.5 to source x/2 - 0.25
                let sx = ((x as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
                let sy = ((y as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
                let (fx, fy) = (sx - sx.floor(), sy - sy.floor());
                let (x0, y0) = (sx.floor() as i64, sy.floor() as i64);
                for c in 0..2 {
                    let v = crop(x0, y0)[c] as f64 * (1.0 - fx) * (1.0 - fy)
                        + crop(x0 + 1, y0)[c] as f64 * fx * (1.0 - fy)
                        + crop(x0, y0 + 1)[c] as f64 * (1.0 - fx) * fy
                        + crop(x0 + 1, y0 + 1)[c] as f64 * fx * fy;
                    assert_eq!(
                        got.pixel(x, y)[c],
                        (v + 0.5).floor() as u8,
                        "({x},{y}) c{c}"
                    );
                }
            }
        }
    }

    #[test]
    fn chain_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 6, 4);
        let twice = AugmentChain::new(vec![AugmentOp::FlipH, AugmentOp::FlipH]).unwrap();
        assert_eq!(apply_chain(&img, &twice).unwrap(), img);
        let turns = AugmentChain::new(vec![
            AugmentOp::Rotate90,
            AugmentOp::Rotate90,
            AugmentOp::Rotate180,
        ])
        .unwrap();
        assert_eq!(apply_chain(&img, &turns).unwrap(), img);
    }

    #[test]
    fn chain_restores_dimensions_after_odd_turn() {
        let img = RasterImage::filled(8, 5, [3, 3, 3]);
        let chain = AugmentChain::new(vec![AugmentOp::Rotate90]).unwrap();
        let out = apply_chain(&img, &chain).unwrap();
        assert_eq!((out.width(), out.height()), (8, 5));
        assert!(out.pixels().all(|p| p == [3, 3, 3]));
    }

    #[test]
    fn chain_length_bounds() {
        assert!(AugmentChain::new(vec![]).is_err());
        assert!(AugmentChain::new(vec![AugmentOp::FlipH; 4]).is_err());
        assert!(AugmentChain::new(vec![AugmentOp::Zoom(2.0)]).is_err());
    }

    #[test]
    fn op_strings_round_trip() {
        let chain = AugmentChain::new(vec![
            AugmentOp::FlipH,
            AugmentOp::RotateAngle(12.5),
            AugmentOp::Zoom(1.2),
        ])
        .unwrap();
        let json = serde_json::to_string(&chain).unwrap();
        assert_eq!(json, r#"["flip_h","rot:12.5","zoom:1.20"]"#);
        let back: AugmentChain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, chain);
        assert_eq!(AugmentOp::RotateAngle(-0.0).to_string(), "rot:0.0");
        assert_eq!(AugmentOp::RotateAngle(-3.0).to_string(), "rot:-3.0");
        for s in ["flip_v", "rot90", "rot180", "rot270"] {
            assert_eq!(s.parse::<AugmentOp>().unwrap().to_string(), s);
        }
        assert!("rot:16.0".parse::<AugmentOp>().is_err());
        assert!("zoom:abc".parse::<AugmentOp>().is_err());
        assert!("shear".parse::<AugmentOp>().is_err());
    }

    #[test]
    fn sampled_chains_are_reproducible_and_serializable() {
        let policy = AugmentPolicy::default();
        for i in 0..500 {
            let a = sample_chain(&mut sample_rng(77, i), &policy);
            let b = sample_chain(&mut sample_rng(77, i), &policy);
            assert_eq!(a, b);
            let back = AugmentChain::parse(&a.to_strings()).unwrap();
            assert_eq!(back, a, "{:?}", a.to_strings());
        }
    }

    #[test]
    fn every_variant_is_drawn() {
        let policy = AugmentPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; AugmentOp::VARIANTS];
        for _ in 0..10_000 {
            for op in sample_chain(&mut rng, &policy).ops() {
                seen[op.variant_index()] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c > 0), "{seen:?}");
    }

    #[test]
    fn chain_lengths_are_uniform() {
        let policy = AugmentPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000.0f64;
        let mut counts = [0.0f64; 3];
        for _ in 0..10_000 {
            counts[sample_chain(&mut rng, &policy).ops().len() - 1] += 1.0;
        }
        let p = 1.0 / 3.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c - n * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn policy_validation() {
        assert!(AugmentPolicy::default().validate().is_ok());
        let bad = AugmentPolicy {
            zoom_max: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentPolicy {
            max_chain_len: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
