//! Image files to rasters and back.

use std::path::Path;

use image::{DynamicImage, GrayImage};
use setrecon_core::Raster;

use crate::error::{HarnessError, Result};

/// Extensions the ingester accepts, lower case.
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "pnm", "bmp"];

pub fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Decodes a PNG, binary PGM or BMP file. Grayscale sources give a
/// one-channel raster, everything else is flattened to RGB.
pub fn load_raster(path: &Path) -> Result<Raster<f64>> {
    let img = image::open(path).map_err(|source| HarnessError::Image { path: path.into(), source })?;
    raster_from_image(&img)
}

pub fn raster_from_image(img: &DynamicImage) -> Result<Raster<f64>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raster = if img.color().has_color() {
        Raster::from_u8(w, h, 3, img.to_rgb8().as_raw())
    } else {
        Raster::from_u8(w, h, 1, img.to_luma8().as_raw())
    };
    Ok(raster?)
}

/// Writes an 8-bit grayscale PNG from row-major bytes.
pub fn save_gray_png(path: &Path, width: u32, height: u32, pixels: Vec<u8>) -> Result<()> {
    let img = GrayImage::from_raw(width, height, pixels)
        .ok_or_else(|| HarnessError::InvalidParams(format!("pixel buffer does not match {width}x{height}")))?;
    img.save(path).map_err(|source| HarnessError::Image { path: path.into(), source })
}

/// Checks that the header decodes without reading pixel data.
pub fn probe(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|source| HarnessError::Image { path: path.into(), source })
}
