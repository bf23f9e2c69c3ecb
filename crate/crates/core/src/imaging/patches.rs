use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::ImageRGB;
use super::resize::bicubic_resize;
use crate::error::{Error, Result};

/// A training pair on the HR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    /// LR version of `target`, bicubically enlarged back to the HR size.
    pub input: ImageRGB,
    pub target: ImageRGB,
    pub scale: usize,
}

/// Bicubic down by `scale`, then bicubic up to the original size.
/// Dimensions must be multiples of `scale`.
pub fn degrade(hr: &ImageRGB, scale: usize) -> Result<ImageRGB> {
    let (h, w) = hr.dims();
    if scale == 0 || h % scale != 0 || w % scale != 0 {
        return Err(Error::InvalidArgument(format!(
            "{h}x{w} image is not divisible by scale {scale}"
        )));
    }
    let lr = bicubic_resize(hr, h / scale, w / scale);
    Ok(bicubic_resize(&lr, h, w))
}

pub fn make_pair(hr: ImageRGB, scale: usize) -> Result<SamplePair> {
    Ok(SamplePair {
        input: degrade(&hr, scale)?,
        target: hr,
        scale,
    })
}

/// Top-left corners of a regular grid along one axis, shifted by `offset`.
fn grid(len: usize, patch: usize, stride: usize, offset: usize) -> Vec<usize> {
    (0..)
        .map(|i| offset + i * stride)
        .take_while(|&s| s + patch <= len)
        .collect()
}

/// Cuts `hr` into `patch_size` squares on a `stride` grid and pairs each with
/// its degraded input.
///
/// With `seed = Some(_)` the whole grid is shifted by a seeded offset drawn
/// from the slack left over after tiling, so the patch count does not change.
/// Images smaller than one patch yield no pairs.
pub fn extract_patches(
    hr: &ImageRGB,
    scale: usize,
    patch_size: usize,
    stride: usize,
    seed: Option<u64>,
) -> Result<Vec<SamplePair>> {
    if patch_size == 0 || patch_size % 8 != 0 || scale == 0 || patch_size % scale != 0 {
        return Err(Error::InvalidArgument(format!(
            "patch size {patch_size} must be a positive multiple of 8 and of scale {scale}"
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("patch stride must be positive".into()));
    }
    let (h, w) = hr.dims();
    if h < patch_size || w < patch_size {
        log::warn!("skipping {h}x{w} image: smaller than a {patch_size}px patch");
        return Ok(Vec::new());
    }
    let slack = |len: usize| (len - patch_size) % stride;
    let (oy, ox) = match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (rng.random_range(0..=slack(h)), rng.random_range(0..=slack(w)))
        }
        None => (0, 0),
    };
    let mut pairs = Vec::new();
    for &top in &grid(h, patch_size, stride, oy) {
        for &left in &grid(w, patch_size, stride, ox) {
            let patch = hr.crop(top, left, patch_size, patch_size)?;
            pairs.push(make_pair(patch, scale)?);
        }
    }
    Ok(pairs)
}
