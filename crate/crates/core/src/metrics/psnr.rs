use crate::error::{Error, Result};
use crate::imaging::{rgb_to_y, ImageRGB};

/// Reported for identical inputs, and the ceiling for everything else.
pub const PSNR_CAP: f64 = 100.0;
const PEAK: f64 = 255.0;

/// Y planes of both images with `crop` pixels removed from every border.
/// Returns the planes and their cropped `(height, width)`.
pub(crate) fn cropped_y(
    a: &ImageRGB,
    b: &ImageRGB,
    crop: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
    if a.dims() != b.dims() {
        return Err(Error::InvalidArgument(format!(
            "image sizes differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (h, w) = a.dims();
    if h <= 2 * crop || w <= 2 * crop {
        return Err(Error::InvalidArgument(format!(
            "{h}x{w} image is too small for a {crop}px border crop"
        )));
    }
    Ok((
        crop_plane(&rgb_to_y(a), h, w, crop),
        crop_plane(&rgb_to_y(b), h, w, crop),
        h - 2 * crop,
        w - 2 * crop,
    ))
}

pub fn crop_plane(plane: &[f64], h: usize, w: usize, crop: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((h - 2 * crop) * (w - 2 * crop));
    for y in crop..h - crop {
        out.extend_from_slice(&plane[y * w + crop..y * w + w - crop]);
    }
    out
}

/// PSNR in dB between two planes on the 8-bit scale, capped at [`PSNR_CAP`].
pub fn psnr_planes(a: &[f64], b: &[f64]) -> f64 {
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let mse = sse / a.len() as f64;
    if mse == 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP)
}

/// PSNR on the luma plane after removing `crop` pixels from each border.
pub fn psnr_y(a: &ImageRGB, b: &ImageRGB, crop: usize) -> Result<f64> {
    let (ya, yb, _, _) = cropped_y(a, b, crop)?;
    Ok(psnr_planes(&ya, &yb))
}
