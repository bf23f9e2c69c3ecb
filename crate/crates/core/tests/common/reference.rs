//! Naive `f64` re-implementation of the network used as a test oracle.
//! Everything here is written from the layer definitions with plain loops,
//! without sharing code with the engine.

use std::cell::RefCell;
use std::collections::HashMap;

thread_local! {
    static SIGNS: RefCell<Option<Vec<bool>>> = const { RefCell::new(None) };
}

/// Evaluates `f` while recording the sign pattern of every PReLU input.
pub fn with_signs<R>(f: impl FnOnce() -> R) -> (R, Vec<bool>) {
    SIGNS.with(|s| *s.borrow_mut() = Some(Vec::new()));
    let out = f();
    let signs = SIGNS.with(|s| s.borrow_mut().take()).unwrap_or_default();
    (out, signs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct T64 {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl T64 {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        T64 { shape, data }
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        T64::new(shape, vec![0.0; shape.iter().product()])
    }

    pub fn idx(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, cc, hh, ww] = self.shape;
        ((n * cc + c) * hh + y) * ww + x
    }

    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(n, c, y, x)]
    }
}

pub type Params = HashMap<String, T64>;

pub fn p<'a>(params: &'a Params, name: &str) -> &'a T64 {
    params.get(name).unwrap_or_else(|| panic!("reference parameter {name} missing"))
}

/// Direct convolution; `w` is `(out, in, k, k)`.
pub fn conv2d(x: &T64, w: &T64, b: &[f64], stride: usize, pad: usize) -> T64 {
    let [n, cin, h, wd] = x.shape;
    let [cout, wcin, k, _] = w.shape;
    assert_eq!(cin, wcin);
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut y = T64::zeros([n, cout, oh, ow]);
    for b_ in 0..n {
        for o in 0..cout {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = b[o];
                    for c in 0..cin {
                        for ki in 0..k {
                            for kj in 0..k {
                                let yy = (i * stride + ki) as isize - pad as isize;
                                let xx = (j * stride + kj) as isize - pad as isize;
                                if yy < 0 || xx < 0 || yy >= h as isize || xx >= wd as isize {
                                    continue;
                                }
                                acc += w.at(o, c, ki, kj) * x.at(b_, c, yy as usize, xx as usize);
                            }
                        }
                    }
                    let id = y.idx(b_, o, i, j);
                    y.data[id] = acc;
                }
            }
        }
    }
    y
}

/// Transposed convolution by scattering; `w` is `(in, out, k, k)`.
pub fn conv_transpose2d(x: &T64, w: &T64, b: &[f64], stride: usize, pad: usize) -> T64 {
    let [n, cin, h, wd] = x.shape;
    let [wcin, cout, k, _] = w.shape;
    assert_eq!(cin, wcin);
    let oh = (h - 1) * stride + k - 2 * pad;
    let ow = (wd - 1) * stride + k - 2 * pad;
    let mut y = T64::zeros([n, cout, oh, ow]);
    for b_ in 0..n {
        for o in 0..cout {
            for i in 0..oh {
                for j in 0..ow {
                    let id = y.idx(b_, o, i, j);
                    y.data[id] = b[o];
                }
            }
        }
        for c in 0..cin {
            for i in 0..h {
                for j in 0..wd {
                    let v = x.at(b_, c, i, j);
                    for o in 0..cout {
                        for ki in 0..k {
                            for kj in 0..k {
                                let yy = (i * stride + ki) as isize - pad as isize;
                                let xx = (j * stride + kj) as isize - pad as isize;
                                if yy < 0 || xx < 0 || yy >= oh as isize || xx >= ow as isize {
                                    continue;
                                }
                                let id = y.idx(b_, o, yy as usize, xx as usize);
                                y.data[id] += v * w.at(c, o, ki, kj);
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

pub fn prelu(x: &T64, slope: &[f64]) -> T64 {
    let [n, c, h, w] = x.shape;
    SIGNS.with(|s| {
        if let Some(log) = s.borrow_mut().as_mut() {
            log.extend(x.data.iter().map(|&v| v > 0.0));
        }
    });
    let mut y = x.clone();
    for b in 0..n {
        for ch in 0..c {
            for i in 0..h * w {
                let id = (b * c + ch) * h * w + i;
                if y.data[id] <= 0.0 {
                    y.data[id] *= slope[ch];
                }
            }
        }
    }
    y
}

pub fn zip(a: &T64, b: &T64, f: impl Fn(f64, f64) -> f64) -> T64 {
    assert_eq!(a.shape, b.shape);
    T64::new(a.shape, a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect())
}

pub fn add(a: &T64, b: &T64) -> T64 {
    zip(a, b, |x, y| x + y)
}

pub fn sub(a: &T64, b: &T64) -> T64 {
    zip(a, b, |x, y| x - y)
}

/// Softmax along `axis` by explicit index enumeration.
pub fn softmax(x: &T64, axis: usize) -> T64 {
    let s = x.shape;
    let mut y = x.clone();
    let mut idx = [0usize; 4];
    let total: usize = s.iter().product();
    for flat in 0..total {
        let mut r = flat;
        for d in (0..4).rev() {
            idx[d] = r % s[d];
            r /= s[d];
        }
        if idx[axis] != 0 {
            continue;
        }
        let line: Vec<usize> = (0..s[axis])
            .map(|k| {
                let mut j = idx;
                j[axis] = k;
                ((j[0] * s[1] + j[1]) * s[2] + j[2]) * s[3] + j[3]
            })
            .collect();
        let denom: f64 = line.iter().map(|&i| x.data[i].exp()).sum();
        for &i in &line {
            y.data[i] = x.data[i].exp() / denom;
        }
    }
    y
}

pub fn mse(a: &T64, b: &T64) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data.len() as f64
}

pub fn l1(a: &T64, b: &T64) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64
}

pub fn conv_named(params: &Params, name: &str, x: &T64, stride: usize, pad: usize, transposed: bool) -> T64 {
    let w = p(params, &format!("{name}.weight"));
    let b = &p(params, &format!("{name}.bias")).data;
    if transposed {
        conv_transpose2d(x, w, b, stride, pad)
    } else {
        conv2d(x, w, b, stride, pad)
    }
}

pub fn prelu_named(params: &Params, name: &str, x: &T64) -> T64 {
    prelu(x, &p(params, &format!("{name}.slope")).data)
}

/// Up (`up = true`) or down back-projection block:
/// `Ω(s) + act₂(second(λx − act₃(mirror(s))))` with `s = act₁(main(x))`.
/// Returns the output and the pre-activation of the last PReLU.
pub fn projection(params: &Params, prefix: &str, x: &T64, up: bool) -> (T64, T64) {
    let n = |l: &str| format!("{prefix}.{l}");
    let main = conv_named(params, &n("main"), x, 2, 2, up);
    let s = prelu_named(params, &n("main"), &main);
    let mirror = conv_named(params, &n("mirror"), &s, 2, 2, !up);
    let mirror = prelu_named(params, &n("mirror"), &mirror);
    let lam = conv_named(params, &n("lambda"), x, 1, 0, false);
    let resid = sub(&lam, &mirror);
    let pre = conv_named(params, &n("second"), &resid, 2, 2, up);
    let corr = prelu_named(params, &n("second"), &pre);
    let omega = conv_named(params, &n("omega"), &s, 1, 0, false);
    (add(&omega, &corr), pre)
}

pub struct HgRef {
    pub features: T64,
    pub coarse: T64,
    pub weight: T64,
    pub last_preact: T64,
}

pub fn hourglass(params: &Params, prefix: &str, x: &T64, depth: usize) -> HgRef {
    let mut downs = Vec::new();
    let mut cur = x.clone();
    for i in 0..depth {
        cur = projection(params, &format!("{prefix}.dbp{i}"), &cur, false).0;
        downs.push(cur.clone());
    }
    let mut last = None;
    for i in (0..depth).rev() {
        if i + 1 < depth {
            let skip = conv_named(params, &format!("{prefix}.shortcut{}", i + 1), &downs[i], 1, 0, false);
            cur = add(&cur, &skip);
        }
        let (out, pre) = projection(params, &format!("{prefix}.ubp{i}"), &cur, true);
        cur = out;
        last = Some(pre);
    }
    HgRef {
        coarse: conv_named(params, &format!("{prefix}.coarse"), &cur, 1, 1, false),
        weight: conv_named(params, &format!("{prefix}.weight"), &cur, 1, 1, false),
        features: cur,
        last_preact: last.unwrap(),
    }
}

/// Softmax-weighted sum written per pixel from the definition.
pub fn wr(coarse: &[T64], weights: &[T64]) -> T64 {
    let mut out = T64::zeros(coarse[0].shape);
    for i in 0..out.data.len() {
        let denom: f64 = weights.iter().map(|w| w.data[i].exp()).sum();
        out.data[i] = coarse
            .iter()
            .zip(weights)
            .map(|(c, w)| w.data[i].exp() / denom * c.data[i])
            .sum();
    }
    out
}

pub fn concat_channels(parts: &[T64]) -> T64 {
    let [n, _, h, w] = parts[0].shape;
    let c: usize = parts.iter().map(|p| p.shape[1]).sum();
    let mut out = T64::zeros([n, c, h, w]);
    for b in 0..n {
        let mut off = 0;
        for part in parts {
            for ch in 0..part.shape[1] {
                for y in 0..h {
                    for x in 0..w {
                        let id = out.idx(b, off + ch, y, x);
                        out.data[id] = part.at(b, ch, y, x);
                    }
                }
            }
            off += part.shape[1];
        }
    }
    out
}

pub struct ModelRef {
    pub sr: T64,
    pub coarse: Vec<T64>,
    pub weights: Vec<T64>,
}

pub fn model(params: &Params, x: &T64, modules: usize, depth: usize, plain: bool) -> ModelRef {
    let f = conv_named(params, "feature.conv", x, 1, 1, false);
    let mut feats = prelu_named(params, "feature.act", &f);
    let mut coarse = Vec::new();
    let mut weights = Vec::new();
    for k in 0..modules {
        let out = hourglass(params, &format!("hg{k}"), &feats, depth);
        coarse.push(out.coarse);
        weights.push(out.weight);
        if k + 1 < modules {
            let skip = conv_named(params, &format!("global{k}"), &feats, 1, 0, false);
            feats = add(&out.features, &skip);
        }
    }
    let sr = if plain {
        conv_named(params, "plain_head", &concat_channels(&coarse), 1, 1, false)
    } else {
        wr(&coarse, &weights)
    };
    ModelRef { sr, coarse, weights }
}
