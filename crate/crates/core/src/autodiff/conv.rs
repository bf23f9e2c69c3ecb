//! Direct and transposed 2-D convolution kernels (im2col + GEMM).
//!
//! Direct convolution weights are laid out `(out, in, k, k)`. Transposed
//! convolution weights are laid out `(in, out, k, k)`, i.e. the layout of the
//! direct convolution it is the adjoint of.

use super::gemm::gemm;
use super::tensor::Shape;
use crate::error::{Error, Result};

/// Geometry of a square-kernel convolution with zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub const fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    /// The 6×6, stride 2, padding 2 sampler geometry used by the projection blocks.
    pub const fn sampler(in_channels: usize, out_channels: usize) -> Self {
        Self::new(in_channels, out_channels, 6, 2, 2)
    }

    pub const fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::new(in_channels, out_channels, 1, 1, 0)
    }

    pub const fn same3x3(in_channels: usize, out_channels: usize) -> Self {
        Self::new(in_channels, out_channels, 3, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "convolution needs kernel >= 1 and stride >= 1, got {self:?}"
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "convolution with zero channels: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn weight_shape(&self, transposed: bool) -> Shape {
        let k = self.kernel;
        if transposed {
            Shape::new(self.in_channels, self.out_channels, k, k)
        } else {
            Shape::new(self.out_channels, self.in_channels, k, k)
        }
    }

    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel * self.kernel
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    /// `floor((len + 2p − k) / s) + 1`, or `None` when the window does not fit.
    pub fn conv_out_len(&self, len: usize) -> Option<usize> {
        let padded = len + 2 * self.padding;
        if padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// `(len − 1)·s − 2p + k`, or `None` when that is not positive.
    pub fn transposed_out_len(&self, len: usize) -> Option<usize> {
        if len == 0 {
            return None;
        }
        let grown = (len - 1) * self.stride + self.kernel;
        grown
            .checked_sub(2 * self.padding)
            .filter(|&v| v > 0)
    }

    pub fn conv_output_shape(&self, input: Shape) -> Result<Shape> {
        self.validate()?;
        if input.c() != self.in_channels {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "channel dimension: input has {} channels, convolution expects {}",
                    input.c(),
                    self.in_channels
                ),
            ));
        }
        let ho = self.conv_out_len(input.h()).ok_or_else(|| {
            Error::shape(
                "conv2d",
                format!("height {} too small for kernel {}", input.h(), self.kernel),
            )
        })?;
        let wo = self.conv_out_len(input.w()).ok_or_else(|| {
            Error::shape(
                "conv2d",
                format!("width {} too small for kernel {}", input.w(), self.kernel),
            )
        })?;
        Ok(Shape::new(input.n(), self.out_channels, ho, wo))
    }

    pub fn transposed_output_shape(&self, input: Shape) -> Result<Shape> {
        self.validate()?;
        if input.c() != self.in_channels {
            return Err(Error::shape(
                "conv_transpose2d",
                format!(
                    "channel dimension: input has {} channels, convolution expects {}",
                    input.c(),
                    self.in_channels
                ),
            ));
        }
        let ho = self.transposed_out_len(input.h()).ok_or_else(|| {
            Error::shape(
                "conv_transpose2d",
                format!("negative or zero output height from input height {}", input.h()),
            )
        })?;
        let wo = self.transposed_out_len(input.w()).ok_or_else(|| {
            Error::shape(
                "conv_transpose2d",
                format!("negative or zero output width from input width {}", input.w()),
            )
        })?;
        Ok(Shape::new(input.n(), self.out_channels, ho, wo))
    }
}

/// Plane geometry for im2col/col2im: `(channels, h, w)` source, `(ho, wo)` windows.
#[derive(Clone, Copy)]
struct Window {
    channels: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    k: usize,
    s: usize,
    p: usize,
}

impl Window {
    fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }
    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col(src: &[f32], g: Window, cols: &mut [f32]) {
    let n = g.cols();
    for c in 0..g.channels {
        let plane = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let out = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.ho {
                    let iy = (oy * g.s + ki) as isize - g.p as isize;
                    let dst = &mut out[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let line = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.s + kj) as isize - g.p as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            line[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds `cols` back onto `dst` (the adjoint of [`im2col`]).
fn col2im(cols: &[f32], g: Window, dst: &mut [f32]) {
    let n = g.cols();
    for c in 0..g.channels {
        let plane = &mut dst[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.ho {
                    let iy = (oy * g.s + ki) as isize - g.p as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let line = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.s + kj) as isize - g.p as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            line[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn add_bias(y: &mut [f32], bias: &[f32], plane: usize) {
    for (chunk, b) in y.chunks_exact_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn accumulate_bias_grad(dy: &[f32], plane: usize, db: &mut [f32]) {
    for (chunk, g) in dy.chunks_exact(plane).zip(db.iter_mut()) {
        *g += chunk.iter().sum::<f32>();
    }
}

fn check_params(op: &'static str, spec: &ConvSpec, w: &[f32], b: &[f32]) -> Result<()> {
    if w.len() != spec.weight_len() {
        return Err(Error::shape(
            op,
            format!("weight length {} for {spec:?}", w.len()),
        ));
    }
    if b.len() != spec.out_channels {
        return Err(Error::shape(
            op,
            format!(
                "bias length {} but out_channels is {}",
                b.len(),
                spec.out_channels
            ),
        ));
    }
    Ok(())
}

/// Gradients requested from a convolution backward pass.
#[derive(Debug, Default)]
pub struct ConvGrads {
    pub input: Option<Vec<f32>>,
    pub weight: Option<Vec<f32>>,
    pub bias: Option<Vec<f32>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Wants {
    pub input: bool,
    pub weight: bool,
    pub bias: bool,
}

pub fn conv2d_forward(
    x: &[f32],
    xs: Shape,
    w: &[f32],
    b: &[f32],
    spec: &ConvSpec,
) -> Result<(Vec<f32>, Shape)> {
    let ys = spec.conv_output_shape(xs)?;
    check_params("conv2d", spec, w, b)?;
    let g = Window {
        channels: xs.c(),
        h: xs.h(),
        w: xs.w(),
        ho: ys.h(),
        wo: ys.w(),
        k: spec.kernel,
        s: spec.stride,
        p: spec.padding,
    };
    let in_len = xs.c() * xs.h() * xs.w();
    let out_len = ys.c() * ys.h() * ys.w();
    let mut y = vec![0.0; ys.numel()];
    let mut cols = if spec.is_pointwise() {
        Vec::new()
    } else {
        vec![0.0; g.rows() * g.cols()]
    };
    for i in 0..xs.n() {
        let xi = &x[i * in_len..(i + 1) * in_len];
        let yi = &mut y[i * out_len..(i + 1) * out_len];
        let colref: &[f32] = if spec.is_pointwise() {
            xi
        } else {
            im2col(xi, g, &mut cols);
            &cols
        };
        gemm(
            spec.out_channels,
            g.rows(),
            g.cols(),
            w,
            false,
            colref,
            false,
            0.0,
            yi,
        );
        add_bias(yi, b, g.cols());
    }
    Ok((y, ys))
}

pub fn conv2d_backward(
    dy: &[f32],
    x: &[f32],
    xs: Shape,
    w: &[f32],
    spec: &ConvSpec,
    wants: Wants,
) -> ConvGrads {
    let ys = spec
        .conv_output_shape(xs)
        .expect("shape validated in forward");
    let g = Window {
        channels: xs.c(),
        h: xs.h(),
        w: xs.w(),
        ho: ys.h(),
        wo: ys.w(),
        k: spec.kernel,
        s: spec.stride,
        p: spec.padding,
    };
    let in_len = xs.c() * xs.h() * xs.w();
    let out_len = ys.c() * ys.h() * ys.w();
    let mut out = ConvGrads {
        input: wants.input.then(|| vec![0.0; xs.numel()]),
        weight: wants.weight.then(|| vec![0.0; w.len()]),
        bias: wants.bias.then(|| vec![0.0; spec.out_channels]),
    };
    let pointwise = spec.is_pointwise();
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![0.0; g.rows() * g.cols()]
    };
    for i in 0..xs.n() {
        let dyi = &dy[i * out_len..(i + 1) * out_len];
        if let Some(db) = &mut out.bias {
            accumulate_bias_grad(dyi, g.cols(), db);
        }
        if let Some(dw) = &mut out.weight {
            let xi = &x[i * in_len..(i + 1) * in_len];
            let colref: &[f32] = if pointwise {
                xi
            } else {
                im2col(xi, g, &mut cols);
                &cols
            };
            gemm(
                spec.out_channels,
                g.cols(),
                g.rows(),
                dyi,
                false,
                colref,
                true,
                1.0,
                dw,
            );
        }
        if let Some(dx) = &mut out.input {
            let dxi = &mut dx[i * in_len..(i + 1) * in_len];
            if pointwise {
                gemm(
                    g.rows(),
                    spec.out_channels,
                    g.cols(),
                    w,
                    true,
                    dyi,
                    false,
                    0.0,
                    dxi,
                );
            } else {
                gemm(
                    g.rows(),
                    spec.out_channels,
                    g.cols(),
                    w,
                    true,
                    dyi,
                    false,
                    0.0,
                    &mut cols,
                );
                col2im(&cols, g, dxi);
            }
        }
    }
    out
}

fn transposed_window(spec: &ConvSpec, xs: Shape, ys: Shape) -> Window {
    // The transposed convolution scatters onto the output grid exactly as the
    // matching direct convolution gathers from it.
    Window {
        channels: spec.out_channels,
        h: ys.h(),
        w: ys.w(),
        ho: xs.h(),
        wo: xs.w(),
        k: spec.kernel,
        s: spec.stride,
        p: spec.padding,
    }
}

pub fn conv_transpose2d_forward(
    x: &[f32],
    xs: Shape,
    w: &[f32],
    b: &[f32],
    spec: &ConvSpec,
) -> Result<(Vec<f32>, Shape)> {
    let ys = spec.transposed_output_shape(xs)?;
    check_params("conv_transpose2d", spec, w, b)?;
    let g = transposed_window(spec, xs, ys);
    let in_len = xs.c() * xs.h() * xs.w();
    let out_len = ys.c() * ys.h() * ys.w();
    let mut y = vec![0.0; ys.numel()];
    let mut cols = vec![0.0; g.rows() * g.cols()];
    for i in 0..xs.n() {
        let xi = &x[i * in_len..(i + 1) * in_len];
        let yi = &mut y[i * out_len..(i + 1) * out_len];
        gemm(
            g.rows(),
            spec.in_channels,
            g.cols(),
            w,
            true,
            xi,
            false,
            0.0,
            &mut cols,
        );
        col2im(&cols, g, yi);
        add_bias(yi, b, ys.h() * ys.w());
    }
    Ok((y, ys))
}

pub fn conv_transpose2d_backward(
    dy: &[f32],
    x: &[f32],
    xs: Shape,
    w: &[f32],
    spec: &ConvSpec,
    wants: Wants,
) -> ConvGrads {
    let ys = spec
        .transposed_output_shape(xs)
        .expect("shape validated in forward");
    let g = transposed_window(spec, xs, ys);
    let in_len = xs.c() * xs.h() * xs.w();
    let out_len = ys.c() * ys.h() * ys.w();
    let mut out = ConvGrads {
        input: wants.input.then(|| vec![0.0; xs.numel()]),
        weight: wants.weight.then(|| vec![0.0; w.len()]),
        bias: wants.bias.then(|| vec![0.0; spec.out_channels]),
    };
    if !wants.input && !wants.weight && !wants.bias {
        return out;
    }
    let mut cols = vec![0.0; g.rows() * g.cols()];
    for i in 0..xs.n() {
        let dyi = &dy[i * out_len..(i + 1) * out_len];
        if let Some(db) = &mut out.bias {
            accumulate_bias_grad(dyi, ys.h() * ys.w(), db);
        }
        if !wants.input && !wants.weight {
            continue;
        }
        im2col(dyi, g, &mut cols);
        if let Some(dx) = &mut out.input {
            gemm(
                spec.in_channels,
                g.rows(),
                g.cols(),
                w,
                false,
                &cols,
                false,
                0.0,
                &mut dx[i * in_len..(i + 1) * in_len],
            );
        }
        if let Some(dw) = &mut out.weight {
            let xi = &x[i * in_len..(i + 1) * in_len];
            gemm(
                spec.in_channels,
                g.cols(),
                g.rows(),
                xi,
                false,
                &cols,
                true,
                1.0,
                dw,
            );
        }
    }
    out
}
