use crate::autodiff::{Shape, Tensor4};
use crate::error::{Error, Result};

/// Planar RGB image with `f32` samples, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRGB {
    height: usize,
    width: usize,
    // R plane, then G plane, then B plane.
    data: Vec<f32>,
}

impl ImageRGB {
    pub fn from_planar(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != 3 * height * width {
            return Err(Error::InvalidArgument(format!(
                "{} samples for a {height}x{width} RGB image",
                data.len()
            )));
        }
        Ok(ImageRGB {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        let plane = height * width;
        let data = rgb.iter().flat_map(|&v| std::iter::repeat_n(v, plane)).collect();
        Self::from_planar(height, width, data)
    }

    /// Builds from interleaved 8-bit RGB, mapping bytes to `[0, 1]`.
    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 3 * height * width {
            return Err(Error::InvalidArgument("rgb8 buffer length mismatch".into()));
        }
        let plane = height * width;
        let mut data = vec![0.0; 3 * plane];
        for (i, px) in bytes.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = f32::from(px[c]) / 255.0;
            }
        }
        Self::from_planar(height, width, data)
    }

    /// Interleaved 8-bit RGB after clamping to `[0, 1]` and rounding half away from zero.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let plane = self.height * self.width;
        let mut out = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            for c in 0..3 {
                out.push(quantize(self.data[c * plane + i]));
            }
        }
        out
    }

    /// Snaps every sample onto the 8-bit grid (what a save/load round trip yields).
    pub fn quantized(&self) -> ImageRGB {
        ImageRGB {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&v| f32::from(quantize(v)) / 255.0)
                .collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let p = self.height * self.width;
        &self.data[c * p..(c + 1) * p]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImageRGB> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::InvalidArgument(format!(
                "crop {height}x{width}+{top}+{left} outside {}x{} image",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(3 * height * width);
        for c in 0..3 {
            for y in top..top + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + left..row + left + width]);
            }
        }
        Self::from_planar(height, width, data)
    }

    /// Crops bottom/right so both dimensions are multiples of `m`.
    pub fn mod_crop(&self, m: usize) -> Result<ImageRGB> {
        let h = self.height - self.height % m;
        let w = self.width - self.width % m;
        self.crop(0, 0, h, w)
    }

    pub fn to_tensor(&self) -> Tensor4 {
        Tensor4::from_vec(Shape::new(1, 3, self.height, self.width), self.data.clone())
            .expect("3 planes")
    }

    /// Converts batch item `index` of a 3-channel tensor.
    pub fn from_tensor(t: &Tensor4, index: usize) -> Result<ImageRGB> {
        let s = t.shape();
        if s.c() != 3 {
            return Err(Error::shape("from_tensor", format!("expected 3 channels, got {s}")));
        }
        let item = t.batch_item(index)?;
        Self::from_planar(s.h(), s.w(), item.into_data())
    }
}

pub fn quantize(v: f32) -> u8 {
    // `f32::round` rounds half away from zero.
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
