//! PNG and binary PPM/PGM reading and writing.

use std::path::Path;

use image::{ExtendedColorType, ImageFormat, ImageReader};

use super::image::ImageRGB;
use crate::error::{Error, Result};

fn image_err(path: &Path, reason: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Loads an 8-bit PNG, PPM or PGM file; grayscale is replicated to RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRGB> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(image_err(path, "unrecognised image format"));
    }
    let decoded = reader.decode().map_err(|e| image_err(path, e))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageRGB::from_rgb8(h as usize, w as usize, rgb.as_raw())
        .map_err(|e| image_err(path, e))
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "ppm" | "pgm" | "pnm" => Ok(ImageFormat::Pnm),
        _ => Err(image_err(path, "unsupported extension (expected png, ppm or pgm)")),
    }
}

fn write_buffer(path: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    let format = format_for(path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, format)
        .map_err(|e| image_err(path, e))
}

/// Saves as 8-bit RGB; the format follows the file extension.
pub fn save_image(img: &ImageRGB, path: impl AsRef<Path>) -> Result<()> {
    write_buffer(
        path.as_ref(),
        &img.to_rgb8(),
        img.width(),
        img.height(),
        ExtendedColorType::Rgb8,
    )
}

/// Saves a row-major 8-bit single-channel plane.
pub fn save_gray(bytes: &[u8], height: usize, width: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if bytes.len() != height * width {
        return Err(image_err(path, "gray buffer length mismatch"));
    }
    write_buffer(path, bytes, width, height, ExtendedColorType::L8)
}
