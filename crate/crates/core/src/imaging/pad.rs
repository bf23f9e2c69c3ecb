use super::image::ImageRGB;
use crate::error::{Error, Result};

/// Smallest multiple of `m` that is at least `n`.
pub fn next_multiple(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

/// Reflect-pads planar data on the bottom and right to `out_h × out_w`.
pub fn pad_planes(src: &[f32], planes: usize, h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(planes * out_h * out_w);
    for p in 0..planes {
        for y in 0..out_h {
            let row = &src[(p * h + reflect(y, h)) * w..][..w];
            out.extend((0..out_w).map(|x| row[reflect(x, w)]));
        }
    }
    out
}

/// Reflect-pads the bottom and right edges so both dimensions are multiples of `m`.
/// Returns the padded image and the original `(height, width)`.
pub fn pad_to_multiple(img: &ImageRGB, m: usize) -> Result<(ImageRGB, (usize, usize))> {
    if m == 0 {
        return Err(Error::InvalidArgument("padding multiple must be at least 1".into()));
    }
    let (h, w) = img.dims();
    let (ph, pw) = (next_multiple(h, m), next_multiple(w, m));
    if (ph, pw) == (h, w) {
        return Ok((img.clone(), (h, w)));
    }
    let data = pad_planes(img.data(), 3, h, w, ph, pw);
    Ok((ImageRGB::from_planar(ph, pw, data)?, (h, w)))
}

/// Crops a padded image back to its recorded original size.
pub fn crop_to(img: &ImageRGB, dims: (usize, usize)) -> Result<ImageRGB> {
    if img.dims() == dims {
        return Ok(img.clone());
    }
    img.crop(0, 0, dims.0, dims.1)
}
