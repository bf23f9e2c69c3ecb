use crate::error::Result;
use crate::imaging::augment::{inverse_planes, transform_planes, NUM_TRANSFORMS};
use crate::imaging::ImageRGB;

/// Maps a pre-upsampled input to an SR image of the same size.
pub trait Upscaler {
    fn upscale(&self, input: &ImageRGB) -> Result<ImageRGB>;
}

/// Returns the pre-upsampled input unchanged (the bicubic baseline).
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThrough;

impl Upscaler for PassThrough {
    fn upscale(&self, input: &ImageRGB) -> Result<ImageRGB> {
        Ok(input.clone())
    }
}

/// Runs `model` on all eight dihedral variants of `input`, maps each output
/// back and averages in `f64`.
pub fn self_ensemble_infer<M: Upscaler + ?Sized>(model: &M, input: &ImageRGB) -> Result<ImageRGB> {
    let (h, w) = input.dims();
    let mut acc = vec![0.0f64; 3 * h * w];
    for k in 0..NUM_TRANSFORMS {
        let (d, th, tw) = transform_planes(input.data(), 3, h, w, k)?;
        let out = model.upscale(&ImageRGB::from_planar(th, tw, d)?)?;
        let (back, _, _) = inverse_planes(out.data(), 3, out.height(), out.width(), k)?;
        for (a, &v) in acc.iter_mut().zip(&back) {
            *a += f64::from(v);
        }
    }
    let n = NUM_TRANSFORMS as f64;
    ImageRGB::from_planar(h, w, acc.into_iter().map(|v| (v / n) as f32).collect())
}
