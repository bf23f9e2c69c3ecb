//! Element-wise, reduction and layout kernels shared by the recording tape
//! and the eager evaluator.

use super::tensor::Shape;
use crate::error::{Error, Result};

pub fn check_same(op: &'static str, a: Shape, b: Shape) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("{a} vs {b}")));
    }
    Ok(())
}

pub fn check_axis(op: &'static str, axis: usize) -> Result<()> {
    if axis > 3 {
        return Err(Error::InvalidArgument(format!(
            "{op}: axis {axis} out of range for a 4-D tensor"
        )));
    }
    Ok(())
}

pub fn zip_map(a: &[f32], b: &[f32], f: impl Fn(f32, f32) -> f32) -> Vec<f32> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

pub fn prelu_forward(x: &[f32], shape: Shape, slope: &[f32]) -> Result<Vec<f32>> {
    if slope.len() != shape.c() {
        return Err(Error::shape(
            "prelu",
            format!("{} slopes for {} channels", slope.len(), shape.c()),
        ));
    }
    let plane = shape.h() * shape.w();
    let mut y = x.to_vec();
    for (idx, chunk) in y.chunks_exact_mut(plane).enumerate() {
        let a = slope[idx % shape.c()];
        for v in chunk.iter_mut() {
            if *v <= 0.0 {
                *v *= a;
            }
        }
    }
    Ok(y)
}

/// Returns `(d_input, d_slope)`.
pub fn prelu_backward(
    dy: &[f32],
    x: &[f32],
    shape: Shape,
    slope: &[f32],
    want_input: bool,
    want_slope: bool,
) -> (Option<Vec<f32>>, Option<Vec<f32>>) {
    let plane = shape.h() * shape.w();
    let mut dx = want_input.then(|| vec![0.0; x.len()]);
    let mut da = want_slope.then(|| vec![0.0; slope.len()]);
    for (idx, (xc, dyc)) in x.chunks_exact(plane).zip(dy.chunks_exact(plane)).enumerate() {
        let c = idx % shape.c();
        let a = slope[c];
        if let Some(dx) = &mut dx {
            let dxc = &mut dx[idx * plane..(idx + 1) * plane];
            for ((d, &xv), &g) in dxc.iter_mut().zip(xc).zip(dyc) {
                *d = if xv > 0.0 { g } else { a * g };
            }
        }
        if let Some(da) = &mut da {
            da[c] += xc
                .iter()
                .zip(dyc)
                .filter(|(&xv, _)| xv <= 0.0)
                .map(|(&xv, &g)| xv * g)
                .sum::<f32>();
        }
    }
    (dx, da)
}

pub fn softmax_forward(x: &[f32], shape: Shape, axis: usize) -> Vec<f32> {
    let (outer, len, inner) = shape.around_axis(axis);
    let mut y = vec![0.0; x.len()];
    for o in 0..outer {
        let base = o * len * inner;
        for r in 0..inner {
            let at = |i: usize| base + i * inner + r;
            let max = (0..len).map(|i| x[at(i)]).fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0;
            for i in 0..len {
                let e = (x[at(i)] - max).exp();
                y[at(i)] = e;
                sum += e;
            }
            for i in 0..len {
                y[at(i)] /= sum;
            }
        }
    }
    y
}

pub fn softmax_backward(dy: &[f32], y: &[f32], shape: Shape, axis: usize) -> Vec<f32> {
    let (outer, len, inner) = shape.around_axis(axis);
    let mut dx = vec![0.0; y.len()];
    for o in 0..outer {
        let base = o * len * inner;
        for r in 0..inner {
            let at = |i: usize| base + i * inner + r;
            let dot: f32 = (0..len).map(|i| dy[at(i)] * y[at(i)]).sum();
            for i in 0..len {
                dx[at(i)] = y[at(i)] * (dy[at(i)] - dot);
            }
        }
    }
    dx
}

pub fn concat_shape(shapes: &[Shape], axis: usize) -> Result<Shape> {
    check_axis("concat", axis)?;
    let first = *shapes
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let mut out = first;
    out.0[axis] = 0;
    for s in shapes {
        for d in 0..4 {
            if d != axis && s.0[d] != first.0[d] {
                return Err(Error::shape(
                    "concat",
                    format!("dimension {d} differs: {s} vs {first}"),
                ));
            }
        }
        out.0[axis] += s.0[axis];
    }
    Ok(out)
}

pub fn concat_forward(parts: &[(&[f32], Shape)], axis: usize) -> Result<(Vec<f32>, Shape)> {
    let shapes: Vec<Shape> = parts.iter().map(|p| p.1).collect();
    let out = concat_shape(&shapes, axis)?;
    let (outer, _, inner) = out.around_axis(axis);
    let mut y = Vec::with_capacity(out.numel());
    for o in 0..outer {
        for (data, s) in parts {
            let block = s.0[axis] * inner;
            y.extend_from_slice(&data[o * block..(o + 1) * block]);
        }
    }
    Ok((y, out))
}

/// Splits the upstream gradient of a concatenation back into its parts.
pub fn concat_backward(dy: &[f32], shapes: &[Shape], axis: usize) -> Vec<Vec<f32>> {
    let inner: usize = shapes[0].0[axis + 1..].iter().product();
    let outer: usize = shapes[0].0[..axis].iter().product();
    let total: usize = shapes.iter().map(|s| s.0[axis]).sum::<usize>() * inner;
    let mut out: Vec<Vec<f32>> = shapes.iter().map(|s| Vec::with_capacity(s.numel())).collect();
    for o in 0..outer {
        let mut off = o * total;
        for (part, s) in out.iter_mut().zip(shapes) {
            let block = s.0[axis] * inner;
            part.extend_from_slice(&dy[off..off + block]);
            off += block;
        }
    }
    out
}

pub fn sum_axis_forward(x: &[f32], shape: Shape, axis: usize) -> (Vec<f32>, Shape) {
    let (outer, len, inner) = shape.around_axis(axis);
    let mut out_shape = shape;
    out_shape.0[axis] = 1;
    let mut y = vec![0.0; outer * inner];
    for o in 0..outer {
        // Start from the first slice so a length-1 axis is copied bit-exactly.
        y[o * inner..(o + 1) * inner].copy_from_slice(&x[o * len * inner..(o * len + 1) * inner]);
        for i in 1..len {
            let src = &x[(o * len + i) * inner..(o * len + i + 1) * inner];
            y[o * inner..(o + 1) * inner]
                .iter_mut()
                .zip(src)
                .for_each(|(a, b)| *a += b);
        }
    }
    (y, out_shape)
}

pub fn sum_axis_backward(dy: &[f32], shape: Shape, axis: usize) -> Vec<f32> {
    let (outer, len, inner) = shape.around_axis(axis);
    let mut dx = Vec::with_capacity(shape.numel());
    for o in 0..outer {
        for _ in 0..len {
            dx.extend_from_slice(&dy[o * inner..(o + 1) * inner]);
        }
    }
    dx
}

pub fn mse(a: &[f32], b: &[f32]) -> f32 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    (sum / a.len() as f64) as f32
}

pub fn l1(a: &[f32], b: &[f32]) -> f32 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
        .sum();
    (sum / a.len() as f64) as f32
}

/// d(mse)/d(a) scaled by the upstream scalar gradient `g`.
pub fn mse_grad(a: &[f32], b: &[f32], g: f32) -> Vec<f32> {
    let k = 2.0 * g / a.len() as f32;
    zip_map(a, b, |x, y| k * (x - y))
}

pub fn l1_grad(a: &[f32], b: &[f32], g: f32) -> Vec<f32> {
    let k = g / a.len() as f32;
    zip_map(a, b, |x, y| {
        let d = x - y;
        if d > 0.0 {
            k
        } else if d < 0.0 {
            -k
        } else {
            0.0
        }
    })
}
