use super::image::ImageRGB;

/// BT.601 studio-swing luma on the 8-bit scale, for RGB in `[0, 1]`.
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    16.0 + 65.481 * r + 128.553 * g + 24.966 * b
}

/// Y plane (row-major, `height × width`) of an RGB image, values in `[16, 235]`
/// for inputs in `[0, 1]`.
pub fn rgb_to_y(img: &ImageRGB) -> Vec<f64> {
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    r.iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| luma(f64::from(r), f64::from(g), f64::from(b)))
        .collect()
}
