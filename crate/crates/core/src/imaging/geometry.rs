use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ImageGrid;
use crate::error::{Error, Result};

/// Bilinear resampling with pixel-center alignment.
pub fn resize_bilinear(img: &ImageGrid, width: usize, height: usize) -> Result<ImageGrid> {
    if width == 0 || height == 0 {
        return Err(Error::domain(format!(
            "resize target must be positive, got {width}x{height}"
        )));
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let taps = |dst: usize, scale: f64, src_len: usize| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let (y0, y1, fy) = taps(y, sy, img.height());
        for x in 0..width {
            let (x0, x1, fx) = taps(x, sx, img.width());
            for c in 0..ch {
                let top = lerp(img.get(x0, y0, c), img.get(x1, y0, c), fx);
                let bottom = lerp(img.get(x0, y1, c), img.get(x1, y1, c), fx);
                out.push(lerp(top, bottom, fy).clamp(0.0, img.range().max()));
            }
        }
    }
    Ok(ImageGrid::from_parts(width, height, ch, out, img.range()))
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        a
    } else {
        a + (b - a) * t
    }
}

/// Lossless dihedral transforms used for balancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    /// Quarter turn clockwise.
    Rot90,
    Rot180,
    Rot270,
    /// Mirror left-right.
    FlipH,
    /// Mirror top-bottom.
    FlipV,
}

impl AugmentOp {
    /// Fixed cycle order used by dataset balancing.
    pub const CYCLE: [AugmentOp; 5] = [
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
        AugmentOp::FlipH,
        AugmentOp::FlipV,
    ];

    pub fn inverse(self) -> Self {
        match self {
            AugmentOp::Rot90 => AugmentOp::Rot270,
            AugmentOp::Rot270 => AugmentOp::Rot90,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AugmentOp::Rot90 => "rot90",
            AugmentOp::Rot180 => "rot180",
            AugmentOp::Rot270 => "rot270",
            AugmentOp::FlipH => "flip_h",
            AugmentOp::FlipV => "flip_v",
        }
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentOp::CYCLE
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown augmentation '{s}'")))
    }
}

/// Applies `op` as an exact pixel permutation.
pub fn augment(img: &ImageGrid, op: AugmentOp) -> ImageGrid {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let (ow, oh) = match op {
        AugmentOp::Rot90 | AugmentOp::Rot270 => (h, w),
        _ => (w, h),
    };
    // source coordinates for each output pixel
    let src = |x: usize, y: usize| -> (usize, usize) {
        match op {
            AugmentOp::Rot90 => (y, h - 1 - x),
            AugmentOp::Rot180 => (w - 1 - x, h - 1 - y),
            AugmentOp::Rot270 => (w - 1 - y, x),
            AugmentOp::FlipH => (w - 1 - x, y),
            AugmentOp::FlipV => (x, h - 1 - y),
        }
    };
    let mut out = Vec::with_capacity(img.pixels().len());
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = src(x, y);
            for c in 0..ch {
                out.push(img.get(sx, sy, c));
            }
        }
    }
    ImageGrid::from_parts(ow, oh, ch, out, img.range())
}
