//! Central-difference gradient checks of the engine against the `f64` reference.

use std::collections::HashMap;

use hbpn_core::autodiff::{ConvSpec, Graph, ParamStore, Shape, Tape, Tensor4, Var};
use hbpn_core::blocks::{BackProjectionBlock, Conv, Init, PRelu, ParamBuilder};
use hbpn_core::net::{plain_reconstruct, wr_reconstruct, HbpnConfig, HbpnModel, HeadKind, HourGlassModule};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::reference::{self as r, with_signs, Params, T64};

pub const STEP: f64 = 1e-3;
pub const MIN_STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-3;

type EngineFn = Box<dyn Fn(&mut Tape<'_>, &[Var]) -> Var>;
type ReferenceFn = Box<dyn Fn(&Params) -> f64>;

pub struct Case {
    pub name: String,
    pub store: ParamStore,
    pub inputs: Vec<(String, Tensor4)>,
    pub engine: EngineFn,
    pub reference: ReferenceFn,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub checked: usize,
    /// Stencils narrowed below the base step because they crossed a PReLU kink.
    pub narrowed: usize,
    /// Components skipped because even the narrowest stencil crossed a kink.
    pub straddled: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel < TOLERANCE && self.straddled == 0
    }
}

pub fn to64(t: &Tensor4) -> T64 {
    T64::new(t.shape().0, t.data().iter().map(|&v| v as f64).collect())
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape, lo: f32, hi: f32) -> Tensor4 {
    let data = (0..shape.numel()).map(|_| rng.random_range(lo..hi)).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

/// Values with magnitude in `[0.1, 1)` and random sign, kept away from the
/// kinks of PReLU and L1.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor4 {
    let data = (0..shape.numel())
        .map(|_| {
            let m: f32 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor4::from_vec(shape, data).unwrap()
}

/// Gives biases and PReLU slopes non-default values so their gradients are
/// exercised away from the initial point.
pub fn randomize_aux(store: &mut ParamStore, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in store.iter_mut() {
        if p.name.ends_with(".bias") {
            for v in p.tensor.data_mut() {
                *v = rng.random_range(-0.1..0.1);
            }
        } else if p.name.ends_with(".slope") {
            for v in p.tensor.data_mut() {
                *v = rng.random_range(0.05..0.5);
            }
        }
    }
}

/// Relative error of one component: `|a - n| / max(|a|, |n|, floor)`, where
/// the floor is a small fraction of the largest numerical gradient in the case
/// so that components that are zero up to rounding do not dominate.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const FLOOR_FRACTION: f64 = 1e-3;

/// Runs the engine once for analytic gradients, then compares up to
/// `max_per_tensor` sampled components of every parameter and input against
/// central differences of the reference loss.
pub fn check(case: &Case, max_per_tensor: usize, seed: u64) -> CheckReport {
    let mut tape = Tape::new(&case.store);
    let vars: Vec<Var> = case.inputs.iter().map(|(_, t)| tape.leaf(t.clone())).collect();
    let loss = (case.engine)(&mut tape, &vars);
    let grads = tape.backward(loss).expect("backward");

    let mut params: Params = HashMap::new();
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    for id in case.store.ids() {
        let name = case.store.name(id).to_string();
        let t = case.store.get(id);
        params.insert(name.clone(), to64(t));
        let g = grads
            .param(id)
            .map(|g| g.iter().map(|&v| v as f64).collect())
            .unwrap_or_else(|| vec![0.0; t.shape().numel()]);
        analytic.push((name, g));
    }
    for ((name, t), v) in case.inputs.iter().zip(&vars) {
        params.insert(name.clone(), to64(t));
        let g = grads.wrt(*v).expect("input gradient").iter().map(|&v| v as f64).collect();
        analytic.push((name.clone(), g));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut numeric: Vec<(String, usize, f64, f64)> = Vec::new();
    let mut straddled = 0;
    let mut narrowed = 0;
    for (name, a) in &analytic {
        let len = a.len();
        let picks: Vec<usize> = if len <= max_per_tensor {
            (0..len).collect()
        } else {
            sample(&mut rng, len, max_per_tensor).into_vec()
        };
        for i in picks {
            let orig = params[name].data[i];
            let mut estimate = None;
            let mut h = STEP;
            while h >= MIN_STEP {
                params.get_mut(name).unwrap().data[i] = orig + h;
                let (up, up_signs) = with_signs(|| (case.reference)(&params));
                params.get_mut(name).unwrap().data[i] = orig - h;
                let (down, down_signs) = with_signs(|| (case.reference)(&params));
                params.get_mut(name).unwrap().data[i] = orig;
                // A stencil that straddles a PReLU kink does not estimate the
                // derivative; retry with a narrower one.
                if up_signs == down_signs {
                    estimate = Some((up - down) / (2.0 * h));
                    break;
                }
                narrowed += 1;
                h /= 10.0;
            }
            let Some(n) = estimate else {
                straddled += 1;
                continue;
            };
            numeric.push((name.clone(), i, a[i], n));
        }
    }
    let scale = numeric.iter().map(|x| x.3.abs()).fold(0.0, f64::max);
    let floor = (FLOOR_FRACTION * scale).max(1e-12);
    let mut report = CheckReport {
        name: case.name.clone(),
        checked: numeric.len(),
        straddled,
        narrowed,
        max_rel: 0.0,
        worst: String::new(),
    };
    for (name, i, a, n) in numeric {
        let e = relative_error(a, n, floor);
        if e > report.max_rel || report.worst.is_empty() {
            report.max_rel = report.max_rel.max(e);
            report.worst = format!("{name}[{i}]: analytic {a:.6e}, numeric {n:.6e}");
        }
    }
    report
}

fn new_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn conv_case(transposed: bool, seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let mut store = ParamStore::new();
    let (spec, shape) = if transposed {
        (ConvSpec::sampler(3, 2), Shape::new(2, 3, 3, 3))
    } else {
        (ConvSpec::sampler(3, 2), Shape::new(2, 3, 8, 8))
    };
    let conv = ParamBuilder::new(&mut store, &mut rng).conv("c", spec, transposed, Init::Rectified).unwrap();
    randomize_aux(&mut store, seed + 1);
    let x = random_tensor(&mut rng, shape, -1.0, 1.0);
    let out_shape = if transposed {
        spec.transposed_output_shape(shape).unwrap()
    } else {
        spec.conv_output_shape(shape).unwrap()
    };
    let target = random_tensor(&mut rng, out_shape, -1.0, 1.0);
    let t64 = to64(&target);
    let name = if transposed { "transposed convolution" } else { "convolution" };
    Case {
        name: name.into(),
        store,
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let y = conv.forward(g, &v[0]).unwrap();
            let t = g.constant(target.clone());
            g.mse_loss(&y, &t).unwrap()
        }),
        reference: Box::new(move |p| {
            let y = r::conv_named(p, "c", &p["input"], 2, 2, transposed);
            r::mse(&y, &t64)
        }),
    }
}

/// A 3×3 convolution on a random 5×5 input followed by MSE.
pub fn small_conv_case(seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let mut store = ParamStore::new();
    let spec = ConvSpec::same3x3(2, 3);
    let conv = ParamBuilder::new(&mut store, &mut rng).conv("c", spec, false, Init::Rectified).unwrap();
    randomize_aux(&mut store, seed + 1);
    let x = random_tensor(&mut rng, Shape::new(1, 2, 5, 5), -1.0, 1.0);
    let target = random_tensor(&mut rng, Shape::new(1, 3, 5, 5), -1.0, 1.0);
    let t64 = to64(&target);
    Case {
        name: "3x3 convolution on 5x5".into(),
        store,
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let y = conv.forward(g, &v[0]).unwrap();
            let t = g.constant(target.clone());
            g.mse_loss(&y, &t).unwrap()
        }),
        reference: Box::new(move |p| r::mse(&r::conv_named(p, "c", &p["input"], 1, 1, false), &t64)),
    }
}

pub fn prelu_case(seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let mut store = ParamStore::new();
    let act: PRelu = ParamBuilder::new(&mut store, &mut rng).prelu("a", 3).unwrap();
    randomize_aux(&mut store, seed + 1);
    let shape = Shape::new(2, 3, 4, 4);
    let x = away_from_zero(&mut rng, shape);
    let target = random_tensor(&mut rng, shape, -1.0, 1.0);
    let t64 = to64(&target);
    Case {
        name: "prelu".into(),
        store,
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let y = act.forward(g, &v[0]).unwrap();
            let t = g.constant(target.clone());
            g.mse_loss(&y, &t).unwrap()
        }),
        reference: Box::new(move |p| r::mse(&r::prelu_named(p, "a", &p["input"]), &t64)),
    }
}

pub fn softmax_case(axis: usize, seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let shape = Shape::new(3, 4, 2, 3);
    let x = random_tensor(&mut rng, shape, -2.0, 2.0);
    let target = random_tensor(&mut rng, shape, 0.0, 1.0);
    let t64 = to64(&target);
    Case {
        name: format!("softmax (axis {axis})"),
        store: ParamStore::new(),
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let y = g.softmax(&v[0], axis).unwrap();
            let t = g.constant(target.clone());
            g.mse_loss(&y, &t).unwrap()
        }),
        reference: Box::new(move |p| r::mse(&r::softmax(&p["input"], axis), &t64)),
    }
}

pub fn loss_case(l1: bool, seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let shape = Shape::new(2, 3, 4, 4);
    let target = random_tensor(&mut rng, shape, -1.0, 1.0);
    // Offsets of magnitude >= 0.1 keep every residual away from the L1 kink.
    let offset = away_from_zero(&mut rng, shape);
    let x = Tensor4::from_vec(
        shape,
        target.data().iter().zip(offset.data()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();
    let t64 = to64(&target);
    Case {
        name: if l1 { "l1 loss" } else { "mse loss" }.into(),
        store: ParamStore::new(),
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let t = g.constant(target.clone());
            if l1 {
                g.l1_loss(&v[0], &t).unwrap()
            } else {
                g.mse_loss(&v[0], &t).unwrap()
            }
        }),
        reference: Box::new(move |p| if l1 { r::l1(&p["input"], &t64) } else { r::mse(&p["input"], &t64) }),
    }
}

pub fn projection_case(up: bool, seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let mut store = ParamStore::new();
    let (block, shape) = {
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        let mut s = b.scope("blk");
        if up {
            (BackProjectionBlock::up(&mut s, 4).unwrap(), Shape::new(1, 4, 4, 4))
        } else {
            (BackProjectionBlock::down(&mut s, 4).unwrap(), Shape::new(2, 4, 8, 8))
        }
    };
    randomize_aux(&mut store, seed + 1);
    let x = random_tensor(&mut rng, shape, -1.0, 1.0);
    let out_shape = if up {
        Shape::new(shape.n(), 2, shape.h() * 2, shape.w() * 2)
    } else {
        Shape::new(shape.n(), 8, shape.h() / 2, shape.w() / 2)
    };
    let target = random_tensor(&mut rng, out_shape, -1.0, 1.0);
    let t64 = to64(&target);
    Case {
        name: if up { "UBP block" } else { "DBP block" }.into(),
        store,
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let y = block.forward(g, &v[0]).unwrap();
            let t = g.constant(target.clone());
            g.mse_loss(&y, &t).unwrap()
        }),
        reference: Box::new(move |p| r::mse(&r::projection(p, "blk", &p["input"], up).0, &t64)),
    }
}

/// One-level hourglass of the given width on an 8×8 input; the loss touches
/// all three outputs.
pub fn hourglass_case(channels: usize, seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let mut store = ParamStore::new();
    let module = HourGlassModule::new(&mut ParamBuilder::new(&mut store, &mut rng).scope("hg"), channels, 1).unwrap();
    randomize_aux(&mut store, seed + 1);
    let shape = Shape::new(1, channels, 8, 8);
    let x = random_tensor(&mut rng, shape, -1.0, 1.0);
    let tf = random_tensor(&mut rng, shape, -1.0, 1.0);
    let tc = random_tensor(&mut rng, Shape::new(1, 3, 8, 8), -1.0, 1.0);
    let tw = random_tensor(&mut rng, Shape::new(1, 3, 8, 8), -1.0, 1.0);
    let (f64t, c64t, w64t) = (to64(&tf), to64(&tc), to64(&tw));
    Case {
        name: format!("hourglass module (depth 1, width {channels})"),
        store,
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let out = module.forward(g, &v[0]).unwrap();
            let (a, b, c) = (g.constant(tf.clone()), g.constant(tc.clone()), g.constant(tw.clone()));
            let la = g.mse_loss(&out.features, &a).unwrap();
            let lb = g.mse_loss(&out.coarse, &b).unwrap();
            let lc = g.mse_loss(&out.weight, &c).unwrap();
            let s = g.add(&la, &lb).unwrap();
            g.add(&s, &lc).unwrap()
        }),
        reference: Box::new(move |p| {
            let out = r::hourglass(p, "hg", &p["input"], 1);
            r::mse(&out.features, &f64t) + r::mse(&out.coarse, &c64t) + r::mse(&out.weight, &w64t)
        }),
    }
}

/// A reconstruction head over `k` coarse/weight pairs given as inputs.
pub fn head_case(plain: bool, seed: u64) -> Case {
    let mut rng = new_rng(seed);
    let mut store = ParamStore::new();
    let k = 3;
    let head: Option<Conv> = plain.then(|| {
        ParamBuilder::new(&mut store, &mut rng)
            .conv("plain_head", ConvSpec::same3x3(3 * k, 3), false, Init::Linear)
            .unwrap()
    });
    randomize_aux(&mut store, seed + 1);
    let shape = Shape::new(2, 3, 4, 4);
    let mut inputs = Vec::new();
    for i in 0..k {
        inputs.push((format!("coarse{i}"), random_tensor(&mut rng, shape, -1.0, 1.0)));
    }
    if !plain {
        for i in 0..k {
            inputs.push((format!("weight{i}"), random_tensor(&mut rng, shape, -2.0, 2.0)));
        }
    }
    let target = random_tensor(&mut rng, shape, -1.0, 1.0);
    let t64 = to64(&target);
    Case {
        name: if plain { "plain head" } else { "WR head" }.into(),
        store,
        inputs,
        engine: Box::new(move |g, v| {
            let y = match &head {
                Some(h) => plain_reconstruct(g, &v[..k], h).unwrap(),
                None => wr_reconstruct(g, &v[..k], &v[k..]).unwrap(),
            };
            let t = g.constant(target.clone());
            g.mse_loss(&y, &t).unwrap()
        }),
        reference: Box::new(move |p| {
            let coarse: Vec<T64> = (0..k).map(|i| p[&format!("coarse{i}")].clone()).collect();
            let y = if plain {
                r::conv_named(p, "plain_head", &r::concat_channels(&coarse), 1, 1, false)
            } else {
                let w: Vec<T64> = (0..k).map(|i| p[&format!("weight{i}")].clone()).collect();
                r::wr(&coarse, &w)
            };
            r::mse(&y, &t64)
        }),
    }
}

/// A complete small model (two modules of depth 1) with either head.
pub fn model_case(head: HeadKind, seed: u64) -> Case {
    let config = HbpnConfig {
        modules: 2,
        depth: 1,
        base_channels: 2,
        head,
    };
    let mut model = HbpnModel::new(config, seed).unwrap();
    randomize_aux(&mut model.store, seed + 1);
    let mut rng = new_rng(seed + 2);
    let x = random_tensor(&mut rng, Shape::new(1, 3, 4, 4), 0.0, 1.0);
    let target = random_tensor(&mut rng, Shape::new(1, 3, 4, 4), 0.0, 1.0);
    let t64 = to64(&target);
    let store = model.store.clone();
    let plain = head == HeadKind::Plain;
    Case {
        name: format!("{} model (2 modules, depth 1)", head.label()),
        store,
        inputs: vec![("input".into(), x)],
        engine: Box::new(move |g, v| {
            let out = model.forward(g, &v[0]).unwrap();
            let t = g.constant(target.clone());
            g.mse_loss(&out.sr, &t).unwrap()
        }),
        reference: Box::new(move |p| r::mse(&r::model(p, &p["input"], 2, 1, plain).sr, &t64)),
    }
}

/// Every operator and composite checked by the suite.
pub fn all_cases() -> Vec<Case> {
    vec![
        small_conv_case(10),
        conv_case(false, 11),
        conv_case(true, 12),
        prelu_case(13),
        softmax_case(0, 14),
        softmax_case(1, 15),
        loss_case(false, 16),
        loss_case(true, 17),
        projection_case(true, 18),
        projection_case(false, 19),
        hourglass_case(4, 20),
        head_case(false, 21),
        head_case(true, 22),
        model_case(HeadKind::Wr, 23),
        model_case(HeadKind::Plain, 24),
    ]
}

pub const SAMPLES_PER_TENSOR: usize = 64;
