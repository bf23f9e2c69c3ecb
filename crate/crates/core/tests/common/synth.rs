//! Deterministic synthetic test images with smooth and sharp structure.

use hbpn_core::imaging::ImageRGB;

/// Image `i` of a small family: per-channel sinusoids, a disk with a
/// channel-dependent radius and a blocky checker offset.
pub fn synth(i: usize, n: usize) -> ImageRGB {
    let mut d = Vec::with_capacity(3 * n * n);
    for c in 0..3 {
        for y in 0..n {
            for x in 0..n {
                let (fx, fy) = (x as f32, y as f32);
                let f = 0.35 + 0.15 * i as f32;
                let mut v = 0.5 + 0.25 * (f * fx + 0.7 * fy * (c as f32 + 1.0) * 0.3).sin();
                let r = ((fx - 10.0 - i as f32).powi(2) + (fy - 16.0).powi(2)).sqrt();
                if r < 7.0 + c as f32 {
                    v += 0.2;
                }
                if (x / 5 + y / 7 + i) % 3 == 0 {
                    v -= 0.15;
                }
                d.push(v.clamp(0.0, 1.0));
            }
        }
    }
    ImageRGB::from_planar(n, n, d).unwrap()
}
