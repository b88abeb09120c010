//! PNG read/write and JPEG read, always through 8-bit samples.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{to_byte, ImageGrid, PixelRange};
use crate::error::{Error, Result};

/// Extensions recognized as images when scanning directories.
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn from_dynamic(img: DynamicImage) -> ImageGrid {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.into_rgb8();
        let px = rgb.into_raw().into_iter().map(f64::from).collect();
        ImageGrid::from_parts(w, h, 3, px, PixelRange::Byte)
    } else {
        let gray = img.into_luma8();
        let px = gray.into_raw().into_iter().map(f64::from).collect();
        ImageGrid::from_parts(w, h, 1, px, PixelRange::Byte)
    }
}

/// Decodes PNG or JPEG bytes into a byte-range grid. Alpha is dropped.
pub fn decode_image(bytes: &[u8]) -> std::result::Result<ImageGrid, image::ImageError> {
    let mut reader = image::ImageReader::new(Cursor::new(bytes)).with_guessed_format()?;
    let mut limits = image::Limits::default();
    limits.max_image_width = Some(16_384);
    limits.max_image_height = Some(16_384);
    limits.max_alloc = Some(512 * 1024 * 1024);
    reader.limits(limits);
    Ok(from_dynamic(reader.decode()?))
}

pub fn load_image(path: &Path) -> Result<ImageGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Encodes as 8-bit PNG; values are rounded and clamped.
pub fn encode_png(img: &ImageGrid) -> std::result::Result<Vec<u8>, image::ImageError> {
    let bytes: Vec<u8> = to_byte(img).pixels().iter().map(|&v| v as u8).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 3 {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer sized from grid"))
    } else {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer sized from grid"))
    };
    let mut out = Cursor::new(Vec::new());
    dynamic.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn save_png(img: &ImageGrid, path: &Path) -> Result<()> {
    let bytes = encode_png(img).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
