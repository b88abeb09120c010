//! Level-by-level mean fusion of two images in the Haar domain.

use super::wavelet::{
    reconstruct_planes, wavelet_decompose, DetailBands, PlanePyramid, WaveletPyramid,
};
use super::{resize_bilinear, to_byte, ImageGrid, PixelRange};
use crate::error::{Error, Result};

/// Channels whose value spread is below this are treated as constant and
/// only clamped, never stretched.
const FLAT_RANGE: f64 = 1e-6;

fn byte_scale(img: &ImageGrid) -> ImageGrid {
    match img.range() {
        PixelRange::Byte => img.clone(),
        PixelRange::Unit => {
            let px = img.pixels().iter().map(|v| v * 255.0).collect();
            ImageGrid::from_parts(
                img.width(),
                img.height(),
                img.channels(),
                px,
                PixelRange::Byte,
            )
        }
    }
}

fn mean_bands(a: &DetailBands, b: &DetailBands) -> Result<DetailBands> {
    let avg = |x: f64, y: f64| (x + y) / 2.0;
    Ok(DetailBands {
        horizontal: a.horizontal.zip_with(&b.horizontal, avg)?,
        vertical: a.vertical.zip_with(&b.vertical, avg)?,
        diagonal: a.diagonal.zip_with(&b.diagonal, avg)?,
        source_width: a.source_width,
        source_height: a.source_height,
    })
}

fn fused_planes(a: &ImageGrid, b: &ImageGrid, levels: usize) -> Result<Vec<Vec<f64>>> {
    if !a.same_shape(b) {
        return Err(Error::domain(format!(
            "cannot fuse {}x{}x{} with {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let pa = wavelet_decompose(&byte_scale(a), levels)?;
    let pb = wavelet_decompose(&byte_scale(b), levels)?;
    let mut planes = Vec::with_capacity(pa.planes.len());
    for (x, y) in pa.planes.iter().zip(&pb.planes) {
        let approx = x.approx.zip_with(&y.approx, |p, q| (p + q) / 2.0)?;
        let details = x
            .details
            .iter()
            .zip(&y.details)
            .map(|(u, v)| mean_bands(u, v))
            .collect::<Result<Vec<_>>>()?;
        planes.push(PlanePyramid { approx, details });
    }
    let fused = WaveletPyramid { planes, ..pa };
    reconstruct_planes(&fused)
}

/// Fused image before intensity normalization, in byte scale.
///
/// The transform is linear, so this equals the pixel-wise mean of the inputs
/// up to rounding.
pub fn fuse_coefficients(a: &ImageGrid, b: &ImageGrid, levels: usize) -> Result<ImageGrid> {
    let planes = fused_planes(a, b, levels)?;
    let planes: Vec<Vec<f64>> = planes
        .into_iter()
        .map(|p| p.into_iter().map(|v| v.clamp(0.0, 255.0)).collect())
        .collect();
    Ok(ImageGrid::from_planes(
        a.width(),
        a.height(),
        &planes,
        PixelRange::Byte,
    ))
}

/// Min-max stretch of each channel to [0, 255], rounded to integers. Flat
/// channels are clamped instead.
pub fn normalize_to_byte(width: usize, height: usize, planes: &[Vec<f64>]) -> ImageGrid {
    let planes: Vec<Vec<f64>> = planes
        .iter()
        .map(|plane| {
            let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < FLAT_RANGE {
                plane.iter().map(|v| v.clamp(0.0, 255.0).round()).collect()
            } else {
                plane
                    .iter()
                    .map(|v| ((v - lo) / (hi - lo) * 255.0).round())
                    .collect()
            }
        })
        .collect();
    ImageGrid::from_planes(width, height, &planes, PixelRange::Byte)
}

/// Averages approximation and every detail band of both images, inverts the
/// transform and stretches the result to [0, 255].
pub fn fuse_mean(a: &ImageGrid, b: &ImageGrid, levels: usize) -> Result<ImageGrid> {
    let planes = fused_planes(a, b, levels)?;
    Ok(normalize_to_byte(a.width(), a.height(), &planes))
}

/// Resizes both inputs to `size` x `size` and fuses them.
pub fn fuse_standardized(
    a: &ImageGrid,
    b: &ImageGrid,
    levels: usize,
    size: usize,
) -> Result<ImageGrid> {
    let a = to_byte(&resize_bilinear(a, size, size)?);
    let b = to_byte(&resize_bilinear(b, size, size)?);
    let (a, b) = if a.channels() == b.channels() {
        (a, b)
    } else {
        (a.to_gray(), b.to_gray())
    };
    fuse_mean(&a, &b, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_pair_fuses_to_mean() {
        let a = ImageGrid::constant(16, 16, 1, 100.0, PixelRange::Byte).unwrap();
        let b = ImageGrid::constant(16, 16, 1, 200.0, PixelRange::Byte).unwrap();
        let raw = fuse_coefficients(&a, &b, 2).unwrap();
        assert!(raw.pixels().iter().all(|v| (v - 150.0).abs() < 1e-9));
        let out = fuse_mean(&a, &b, 2).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 150.0));
    }

    #[test]
    fn self_fusion_is_normalized_input() {
        let px: Vec<f64> = (0..64).map(|i| ((i * 37) % 200 + 20) as f64).collect();
        let a = ImageGrid::gray(8, 8, px.clone(), PixelRange::Byte).unwrap();
        let out = fuse_mean(&a, &a, 3).unwrap();
        let expected = normalize_to_byte(8, 8, &[px]);
        assert_eq!(out, expected);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = ImageGrid::constant(8, 8, 1, 1.0, PixelRange::Byte).unwrap();
        let b = ImageGrid::constant(8, 4, 1, 1.0, PixelRange::Byte).unwrap();
        assert!(fuse_mean(&a, &b, 1).is_err());
        let out = fuse_standardized(&a, &b, 2, 32).unwrap();
        assert_eq!((out.width(), out.height()), (32, 32));
    }

    #[test]
    fn unit_inputs_are_lifted_to_byte_scale() {
        let a = ImageGrid::constant(4, 4, 1, 0.2, PixelRange::Unit).unwrap();
        let b = ImageGrid::constant(4, 4, 1, 0.4, PixelRange::Unit).unwrap();
        let out = fuse_mean(&a, &b, 1).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 77.0));
    }
}
