//! Classical iterative back projection:
//! `Ŷ ← Ŷ − λ · H⁻¹(H Ŷ − X)` with `H` a bicubic downscale and `H⁻¹` a
//! bicubic upscale. Both operators are applied without clamping so the
//! update stays linear.

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize_linear, ImageRGB};

#[derive(Debug, Clone)]
pub struct BackProjectionResult {
    pub image: ImageRGB,
    /// `‖H Ŷ_t − X‖₂` for `t = 0..=iterations`, on the `[0, 1]` scale.
    pub residuals: Vec<f64>,
}

fn residual(y: &ImageRGB, lr: &ImageRGB) -> (ImageRGB, f64) {
    let mut r = bicubic_resize_linear(y, lr.height(), lr.width());
    let mut norm = 0.0f64;
    for (d, &x) in r.data_mut().iter_mut().zip(lr.data()) {
        *d -= x;
        norm += f64::from(*d) * f64::from(*d);
    }
    (r, norm.sqrt())
}

pub fn classical_back_projection(
    sr: &ImageRGB,
    lr: &ImageRGB,
    scale: usize,
    lambda: f32,
    iterations: usize,
) -> Result<BackProjectionResult> {
    if scale == 0 || sr.height() != lr.height() * scale || sr.width() != lr.width() * scale {
        return Err(Error::InvalidArgument(format!(
            "SR {}x{} is not {scale}x the LR {}x{}",
            sr.height(),
            sr.width(),
            lr.height(),
            lr.width()
        )));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside (0, 1]")));
    }
    let mut y = sr.clone();
    let (mut r, norm) = residual(&y, lr);
    let mut residuals = vec![norm];
    for _ in 0..iterations {
        let back = bicubic_resize_linear(&r, y.height(), y.width());
        for (v, &b) in y.data_mut().iter_mut().zip(back.data()) {
            *v -= lambda * b;
        }
        let (next, norm) = residual(&y, lr);
        r = next;
        residuals.push(norm);
    }
    Ok(BackProjectionResult {
        image: y,
        residuals,
    })
}
