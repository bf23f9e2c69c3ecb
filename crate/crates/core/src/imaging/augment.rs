//! The eight symmetries of the square acting on images.
//!
//! Transform `idx = r + 4·f` first mirrors left/right when `f = 1`, then
//! rotates by `r` quarter turns counter-clockwise.

use super::image::ImageRGB;
use crate::error::{Error, Result};

pub const NUM_TRANSFORMS: usize = 8;

fn check(idx: usize) -> Result<()> {
    if idx >= NUM_TRANSFORMS {
        return Err(Error::InvalidArgument(format!(
            "augmentation index {idx} outside 0..{NUM_TRANSFORMS}"
        )));
    }
    Ok(())
}

/// Mirrors a planar `planes × h × w` buffer left/right.
pub fn hflip_planes(src: &[f32], planes: usize, h: usize, w: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(src.len());
    for row in src[..planes * h * w].chunks_exact(w) {
        out.extend(row.iter().rev());
    }
    out
}

/// Rotates planar data a quarter turn counter-clockwise; result is `w × h`.
pub fn rot90_planes(src: &[f32], planes: usize, h: usize, w: usize) -> Vec<f32> {
    let mut out = vec![0.0; planes * h * w];
    for p in 0..planes {
        let s = &src[p * h * w..(p + 1) * h * w];
        let d = &mut out[p * h * w..(p + 1) * h * w];
        for i in 0..w {
            for j in 0..h {
                d[i * h + j] = s[j * w + (w - 1 - i)];
            }
        }
    }
    out
}

/// Applies transform `idx` to planar data, returning the buffer and its new `(h, w)`.
pub fn transform_planes(
    src: &[f32],
    planes: usize,
    h: usize,
    w: usize,
    idx: usize,
) -> Result<(Vec<f32>, usize, usize)> {
    check(idx)?;
    let (r, f) = (idx % 4, idx / 4);
    let mut data = if f == 1 {
        hflip_planes(src, planes, h, w)
    } else {
        src[..planes * h * w].to_vec()
    };
    let (mut h, mut w) = (h, w);
    for _ in 0..r {
        data = rot90_planes(&data, planes, h, w);
        std::mem::swap(&mut h, &mut w);
    }
    Ok((data, h, w))
}

/// Undoes transform `idx`: `(4 − r) mod 4` further rotations, then the mirror.
pub fn inverse_planes(
    src: &[f32],
    planes: usize,
    h: usize,
    w: usize,
    idx: usize,
) -> Result<(Vec<f32>, usize, usize)> {
    check(idx)?;
    let (r, f) = (idx % 4, idx / 4);
    let mut data = src[..planes * h * w].to_vec();
    let (mut h, mut w) = (h, w);
    for _ in 0..(4 - r) % 4 {
        data = rot90_planes(&data, planes, h, w);
        std::mem::swap(&mut h, &mut w);
    }
    if f == 1 {
        data = hflip_planes(&data, planes, h, w);
    }
    Ok((data, h, w))
}

pub fn transform(img: &ImageRGB, idx: usize) -> Result<ImageRGB> {
    let (d, h, w) = transform_planes(img.data(), 3, img.height(), img.width(), idx)?;
    ImageRGB::from_planar(h, w, d)
}

pub fn inverse_augment(idx: usize, img: &ImageRGB) -> Result<ImageRGB> {
    let (d, h, w) = inverse_planes(img.data(), 3, img.height(), img.width(), idx)?;
    ImageRGB::from_planar(h, w, d)
}

/// All eight transformed copies, index-aligned with [`transform`].
pub fn augment_x8(img: &ImageRGB) -> Vec<ImageRGB> {
    (0..NUM_TRANSFORMS)
        .map(|k| transform(img, k).expect("index in range"))
        .collect()
}
