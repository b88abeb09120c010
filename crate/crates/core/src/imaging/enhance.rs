use serde::{Deserialize, Serialize};

use super::{ImageGrid, PixelRange};
use crate::error::{Error, Result};

/// Power-law transform `out = scale * in^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaParams {
    pub gamma: f64,
    pub scale: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            scale: 1.0,
        }
    }
}

impl GammaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::domain(format!(
                "gamma scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

pub fn gamma_correct(img: &ImageGrid, p: &GammaParams) -> Result<ImageGrid> {
    p.validate()?;
    if img.range() != PixelRange::Unit {
        return Err(Error::domain("gamma correction expects a unit-range image"));
    }
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| (p.scale * v.powf(p.gamma)).clamp(0.0, 1.0))
        .collect();
    Ok(ImageGrid::from_parts(
        img.width(),
        img.height(),
        img.channels(),
        pixels,
        PixelRange::Unit,
    ))
}

/// Global histogram equalization, each channel on its own.
///
/// `out(v) = round((cdf(v) - cdf_min) / (n - cdf_min) * 255)` where `cdf_min`
/// is the cumulative count at the darkest occupied level. A constant channel
/// is returned unchanged.
pub fn hist_equalize(img: &ImageGrid) -> Result<ImageGrid> {
    if img.range() != PixelRange::Byte {
        return Err(Error::domain(
            "histogram equalization expects a byte-range image",
        ));
    }
    if img.pixels().iter().any(|v| v.fract() != 0.0) {
        return Err(Error::domain(
            "histogram equalization expects integer-valued pixels",
        ));
    }
    let mut planes = Vec::with_capacity(img.channels());
    for c in 0..img.channels() {
        planes.push(equalize_plane(&img.plane(c)));
    }
    Ok(ImageGrid::from_planes(
        img.width(),
        img.height(),
        &planes,
        PixelRange::Byte,
    ))
}

fn equalize_plane(plane: &[f64]) -> Vec<f64> {
    let mut hist = [0usize; 256];
    for &v in plane {
        hist[v as usize] += 1;
    }
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let n = plane.len();
    let cdf_min = hist
        .iter()
        .zip(&cdf)
        .find(|(h, _)| **h > 0)
        .map_or(0, |(_, c)| *c);
    if n == cdf_min {
        return plane.to_vec();
    }
    let denom = (n - cdf_min) as f64;
    plane
        .iter()
        .map(|&v| ((cdf[v as usize] - cdf_min) as f64 / denom * 255.0).round())
        .collect()
}

pub fn rescale_unit(img: &ImageGrid) -> Result<ImageGrid> {
    if img.range() != PixelRange::Byte {
        return Err(Error::domain("expected a byte-range image"));
    }
    let pixels = img.pixels().iter().map(|v| v / 255.0).collect();
    Ok(ImageGrid::from_parts(
        img.width(),
        img.height(),
        img.channels(),
        pixels,
        PixelRange::Unit,
    ))
}

/// Unit range back to integer bytes (rounded).
pub fn to_byte(img: &ImageGrid) -> ImageGrid {
    let pixels = match img.range() {
        PixelRange::Unit => img
            .pixels()
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0))
            .collect(),
        PixelRange::Byte => img
            .pixels()
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0))
            .collect(),
    };
    ImageGrid::from_parts(
        img.width(),
        img.height(),
        img.channels(),
        pixels,
        PixelRange::Byte,
    )
}
