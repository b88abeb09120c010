//! Multi-level separable orthonormal Haar transform.
//!
//! One level maps each 2x2 cell `[[a, b], [c, d]]` to
//!
//! ```text
//! approx     = (a + b + c + d) / 2
//! horizontal = ((a + b) - (c + d)) / 2
//! vertical   = ((a + c) - (b + d)) / 2
//! diagonal   = ((a + d) - (b + c)) / 2
//! ```
//!
//! Odd-sized blocks are padded by repeating the last row/column before the
//! level is taken; reconstruction crops the padding back off.

use super::{ImageGrid, PixelRange};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::domain(format!(
                "block {width}x{height} cannot hold {} coefficients",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn same_dims(&self, other: &Block) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Element-wise combination of two equally sized blocks.
    pub fn zip_with(&self, other: &Block, f: impl Fn(f64, f64) -> f64) -> Result<Block> {
        if !self.same_dims(other) {
            return Err(Error::domain("coefficient blocks differ in size"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Block {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

/// Detail coefficients of one level plus the size of the block they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub horizontal: Block,
    pub vertical: Block,
    pub diagonal: Block,
    pub source_width: usize,
    pub source_height: usize,
}

/// Decomposition of a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePyramid {
    pub approx: Block,
    /// Coarsest level first.
    pub details: Vec<DetailBands>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub levels: usize,
    pub width: usize,
    pub height: usize,
    pub range: PixelRange,
    pub planes: Vec<PlanePyramid>,
}

fn half(n: usize) -> usize {
    n.div_ceil(2)
}

fn forward_level(src: &Block) -> (Block, DetailBands) {
    let (w, h) = (half(src.width), half(src.height));
    let mut a = Block::zeros(w, h);
    let mut hz = Block::zeros(w, h);
    let mut vt = Block::zeros(w, h);
    let mut dg = Block::zeros(w, h);
    let last_x = src.width - 1;
    let last_y = src.height - 1;
    for y in 0..h {
        let (y0, y1) = (2 * y, (2 * y + 1).min(last_y));
        for x in 0..w {
            let (x0, x1) = (2 * x, (2 * x + 1).min(last_x));
            let (p, q, r, s) = (
                src.at(x0, y0),
                src.at(x1, y0),
                src.at(x0, y1),
                src.at(x1, y1),
            );
            let i = y * w + x;
            a.data[i] = (p + q + r + s) / 2.0;
            hz.data[i] = ((p + q) - (r + s)) / 2.0;
            vt.data[i] = ((p + r) - (q + s)) / 2.0;
            dg.data[i] = ((p + s) - (q + r)) / 2.0;
        }
    }
    let bands = DetailBands {
        horizontal: hz,
        vertical: vt,
        diagonal: dg,
        source_width: src.width,
        source_height: src.height,
    };
    (a, bands)
}

fn inverse_level(approx: &Block, bands: &DetailBands) -> Result<Block> {
    let (w, h) = (bands.source_width, bands.source_height);
    let shape_ok = w > 0
        && h > 0
        && approx.width == half(w)
        && approx.height == half(h)
        && approx.same_dims(&bands.horizontal)
        && approx.same_dims(&bands.vertical)
        && approx.same_dims(&bands.diagonal);
    if !shape_ok {
        return Err(Error::domain(format!(
            "inconsistent pyramid: {}x{} approximation for a {w}x{h} level",
            approx.width, approx.height
        )));
    }
    let mut out = Block::zeros(w, h);
    for y in 0..approx.height {
        for x in 0..approx.width {
            let i = y * approx.width + x;
            let (a, hz, vt, dg) = (
                approx.data[i],
                bands.horizontal.data[i],
                bands.vertical.data[i],
                bands.diagonal.data[i],
            );
            let cell = [
                (a + hz + vt + dg) / 2.0,
                (a + hz - vt - dg) / 2.0,
                (a - hz + vt - dg) / 2.0,
                (a - hz - vt + dg) / 2.0,
            ];
            for (k, v) in cell.into_iter().enumerate() {
                let (px, py) = (2 * x + k % 2, 2 * y + k / 2);
                if px < w && py < h {
                    out.data[py * w + px] = v;
                }
            }
        }
    }
    Ok(out)
}

fn decompose_plane(plane: Block, levels: usize) -> PlanePyramid {
    let mut approx = plane;
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (next, bands) = forward_level(&approx);
        details.push(bands);
        approx = next;
    }
    details.reverse();
    PlanePyramid { approx, details }
}

pub fn wavelet_decompose(img: &ImageGrid, levels: usize) -> Result<WaveletPyramid> {
    if levels == 0 {
        return Err(Error::domain(
            "at least one decomposition level is required",
        ));
    }
    let min_side = img.width().min(img.height());
    if levels >= usize::BITS as usize || min_side < (1usize << levels) {
        return Err(Error::domain(format!(
            "{levels} levels need at least {} pixels per side, image is {}x{}",
            1u128 << levels.min(127),
            img.width(),
            img.height()
        )));
    }
    let planes = (0..img.channels())
        .map(|c| {
            decompose_plane(
                Block {
                    width: img.width(),
                    height: img.height(),
                    data: img.plane(c),
                },
                levels,
            )
        })
        .collect();
    Ok(WaveletPyramid {
        levels,
        width: img.width(),
        height: img.height(),
        range: img.range(),
        planes,
    })
}

/// Inverse transform. The result carries the pyramid's range tag but values
/// are not clamped, since fused coefficients may leave the range.
pub fn wavelet_reconstruct(pyr: &WaveletPyramid) -> Result<ImageGrid> {
    reconstruct_planes(pyr)
        .map(|planes| ImageGrid::from_planes(pyr.width, pyr.height, &planes, pyr.range))
}

pub(crate) fn reconstruct_planes(pyr: &WaveletPyramid) -> Result<Vec<Vec<f64>>> {
    if pyr.planes.is_empty() || pyr.planes.iter().any(|p| p.details.len() != pyr.levels) {
        return Err(Error::domain("inconsistent pyramid: level count mismatch"));
    }
    let mut out = Vec::with_capacity(pyr.planes.len());
    for plane in &pyr.planes {
        let mut approx = plane.approx.clone();
        for bands in &plane.details {
            approx = inverse_level(&approx, bands)?;
        }
        if approx.width != pyr.width || approx.height != pyr.height {
            return Err(Error::domain(
                "inconsistent pyramid: reconstruction size mismatch",
            ));
        }
        out.push(approx.data);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, px: Vec<f64>) -> ImageGrid {
        ImageGrid::gray(w, h, px, PixelRange::Byte).unwrap()
    }

    #[test]
    fn two_by_two_butterfly() {
        let (a, b, c, d) = (3.0, 7.0, 11.0, 2.0);
        let pyr = wavelet_decompose(&gray(2, 2, vec![a, b, c, d]), 1).unwrap();
        let p = &pyr.planes[0];
        assert_eq!(p.approx.data, vec![(a + b + c + d) / 2.0]);
        assert_eq!(
            p.details[0].horizontal.data,
            vec![((a + b) - (c + d)) / 2.0]
        );
        assert_eq!(p.details[0].vertical.data, vec![((a + c) - (b + d)) / 2.0]);
        assert_eq!(p.details[0].diagonal.data, vec![((a + d) - (b + c)) / 2.0]);
    }

    #[test]
    fn constant_image_has_no_detail() {
        let img = gray(8, 8, vec![5.0; 64]);
        let pyr = wavelet_decompose(&img, 3).unwrap();
        let p = &pyr.planes[0];
        assert!(p.approx.data.iter().all(|&v| (v - 8.0 * 5.0).abs() < 1e-12));
        for bands in &p.details {
            for blk in [&bands.horizontal, &bands.vertical, &bands.diagonal] {
                assert!(blk.data.iter().all(|&v| v.abs() < 1e-12));
            }
        }
        assert!(wavelet_reconstruct(&pyr).unwrap().max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn block_sizes_halve_with_ceiling() {
        let img = gray(13, 7, (0..91).map(|v| (v % 256) as f64).collect());
        let pyr = wavelet_decompose(&img, 2).unwrap();
        let p = &pyr.planes[0];
        assert_eq!((p.approx.width, p.approx.height), (4, 2));
        assert_eq!(
            (
                p.details[1].horizontal.width,
                p.details[1].horizontal.height
            ),
            (7, 4)
        );
        assert_eq!(
            (p.details[1].source_width, p.details[1].source_height),
            (13, 7)
        );
        let back = wavelet_reconstruct(&pyr).unwrap();
        assert!(back.max_abs_diff(&img) < 1e-10);
    }

    #[test]
    fn too_many_levels() {
        let img = gray(4, 8, vec![0.0; 32]);
        assert!(wavelet_decompose(&img, 2).is_ok());
        assert!(wavelet_decompose(&img, 3).is_err());
        assert!(wavelet_decompose(&img, 0).is_err());
        assert!(wavelet_decompose(&img, 200).is_err());
    }

    #[test]
    fn zero_pyramid_reconstructs_to_zero() {
        let img = gray(6, 4, vec![0.0; 24]);
        let pyr = wavelet_decompose(&img, 2).unwrap();
        assert_eq!(wavelet_reconstruct(&pyr).unwrap(), img);
    }

    #[test]
    fn inconsistent_pyramid_is_rejected() {
        let img = gray(4, 4, (0..16).map(f64::from).collect());
        let mut pyr = wavelet_decompose(&img, 1).unwrap();
        pyr.planes[0].details[0].diagonal = Block::zeros(1, 1);
        assert!(wavelet_reconstruct(&pyr).is_err());
        let mut pyr = wavelet_decompose(&img, 1).unwrap();
        pyr.levels = 2;
        assert!(wavelet_reconstruct(&pyr).is_err());
    }
}
