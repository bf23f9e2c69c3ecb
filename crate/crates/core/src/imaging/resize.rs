//! Bicubic resampling following MATLAB's `imresize` conventions: the
//! `a = −0.5` cubic kernel, kernel widening by the scale ratio when
//! shrinking (antialiasing), symmetric edge extension and separable passes
//! ordered by increasing scale factor.

use super::image::ImageRGB;

/// Cubic convolution kernel with `a = −0.5`.
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax <= 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

const KERNEL_WIDTH: f64 = 4.0;

/// Source taps and normalised weights for one output sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Taps {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-output contributions along one axis of length `in_len` resampled to `out_len`.
pub fn contributions(in_len: usize, out_len: usize, antialias: bool) -> Vec<Taps> {
    let scale = out_len as f64 / in_len as f64;
    let (kernel_scale, width) = if scale < 1.0 && antialias {
        (scale, KERNEL_WIDTH / scale)
    } else {
        (1.0, KERNEL_WIDTH)
    };
    let taps = width.ceil() as i64 + 2;
    let period = 2 * in_len as i64;
    (1..=out_len)
        .map(|x| {
            // 1-based output coordinate mapped into 1-based input space.
            let u = x as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (u - width / 2.0).floor() as i64;
            let mut indices = Vec::with_capacity(taps as usize);
            let mut weights = Vec::with_capacity(taps as usize);
            for j in 0..taps {
                let idx = left + j;
                let w = kernel_scale * cubic(kernel_scale * (u - idx as f64));
                if w == 0.0 {
                    continue;
                }
                // Symmetric extension: 1..n, n..1, repeated.
                let m = (idx - 1).rem_euclid(period);
                let src = if m < in_len as i64 { m } else { period - 1 - m };
                indices.push(src as usize);
                weights.push(w);
            }
            let sum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= sum);
            Taps { indices, weights }
        })
        .collect()
}

fn resize_rows(src: &[f64], planes: usize, h: usize, w: usize, out_h: usize) -> Vec<f64> {
    let taps = contributions(h, out_h, true);
    let mut out = vec![0.0; planes * out_h * w];
    for p in 0..planes {
        let plane = &src[p * h * w..(p + 1) * h * w];
        for (oy, t) in taps.iter().enumerate() {
            let dst = &mut out[(p * out_h + oy) * w..(p * out_h + oy + 1) * w];
            for (&iy, &wt) in t.indices.iter().zip(&t.weights) {
                let row = &plane[iy * w..(iy + 1) * w];
                dst.iter_mut().zip(row).for_each(|(d, s)| *d += wt * s);
            }
        }
    }
    out
}

fn resize_cols(src: &[f64], planes: usize, h: usize, w: usize, out_w: usize) -> Vec<f64> {
    let taps = contributions(w, out_w, true);
    let mut out = vec![0.0; planes * h * out_w];
    for r in 0..planes * h {
        let row = &src[r * w..(r + 1) * w];
        let dst = &mut out[r * out_w..(r + 1) * out_w];
        for (d, t) in dst.iter_mut().zip(&taps) {
            *d = t.indices.iter().zip(&t.weights).map(|(&i, &wt)| wt * row[i]).sum();
        }
    }
    out
}

/// Resamples `planes` stacked `h×w` planes to `out_h×out_w` without clamping.
pub fn resize_planes(
    src: &[f32],
    planes: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f32> {
    assert_eq!(src.len(), planes * h * w, "resize_planes: buffer length");
    assert!(out_h > 0 && out_w > 0, "resize_planes: empty output");
    let data: Vec<f64> = src.iter().map(|&v| f64::from(v)).collect();
    let scale_h = out_h as f64 / h as f64;
    let scale_w = out_w as f64 / w as f64;
    let out = if scale_h <= scale_w {
        let t = resize_rows(&data, planes, h, w, out_h);
        resize_cols(&t, planes, out_h, w, out_w)
    } else {
        let t = resize_cols(&data, planes, h, w, out_w);
        resize_rows(&t, planes, h, out_w, out_h)
    };
    out.into_iter().map(|v| v as f32).collect()
}

/// Linear bicubic resampling without output clamping (the operator used
/// where residuals may be negative).
pub fn bicubic_resize_linear(img: &ImageRGB, out_h: usize, out_w: usize) -> ImageRGB {
    let data = resize_planes(img.data(), 3, img.height(), img.width(), out_h, out_w);
    ImageRGB::from_planar(out_h, out_w, data).expect("positive output size")
}

/// Bicubic resampling with output clamped to `[0, 1]`.
pub fn bicubic_resize(img: &ImageRGB, out_h: usize, out_w: usize) -> ImageRGB {
    let mut out = bicubic_resize_linear(img, out_h, out_w);
    out.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}
