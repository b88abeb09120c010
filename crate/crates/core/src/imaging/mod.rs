//! Pixel-level enhancement, Haar wavelet fusion and simple geometry.

mod enhance;
mod fusion;
mod geometry;
pub mod io;
mod wavelet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use enhance::{gamma_correct, hist_equalize, rescale_unit, to_byte, GammaParams};
pub use fusion::{fuse_coefficients, fuse_mean, fuse_standardized, normalize_to_byte};
pub use geometry::{augment, resize_bilinear, AugmentOp};
pub use wavelet::{
    wavelet_decompose, wavelet_reconstruct, Block, DetailBands, PlanePyramid, WaveletPyramid,
};

/// Side length images are standardized to before fusion.
pub const STANDARD_SIZE: usize = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelRange {
    /// Values in [0, 1].
    Unit,
    /// Values in [0, 255].
    Byte,
}

impl PixelRange {
    pub fn max(self) -> f64 {
        match self {
            PixelRange::Unit => 1.0,
            PixelRange::Byte => 255.0,
        }
    }
}

/// Row-major image with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
    range: PixelRange,
}

impl ImageGrid {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<f64>,
        range: PixelRange,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::domain(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::domain("image too large"))?;
        if pixels.len() != expected {
            return Err(Error::domain(format!(
                "{width}x{height}x{channels} image needs {expected} values, got {}",
                pixels.len()
            )));
        }
        let max = range.max();
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=max).contains(*v)) {
            return Err(Error::domain(format!(
                "pixel value {bad} outside [0, {max}]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
            range,
        })
    }

    pub fn gray(width: usize, height: usize, pixels: Vec<f64>, range: PixelRange) -> Result<Self> {
        Self::new(width, height, 1, pixels, range)
    }

    pub fn constant(
        width: usize,
        height: usize,
        channels: usize,
        value: f64,
        range: PixelRange,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
            range,
        )
    }

    /// Skips the range check; callers guarantee the invariant.
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<f64>,
        range: PixelRange,
    ) -> Self {
        debug_assert_eq!(pixels.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            pixels,
            range,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn range(&self) -> PixelRange {
        self.range
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a row-major plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.pixels
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub(crate) fn from_planes(
        width: usize,
        height: usize,
        planes: &[Vec<f64>],
        range: PixelRange,
    ) -> Self {
        let channels = planes.len();
        let mut pixels = vec![0.0; width * height * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                pixels[i * channels + c] = v;
            }
        }
        Self::from_parts(width, height, channels, pixels, range)
    }

    /// Channel-averaged grayscale copy.
    pub fn to_gray(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        Self::from_parts(self.width, self.height, 1, pixels, self.range)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}
