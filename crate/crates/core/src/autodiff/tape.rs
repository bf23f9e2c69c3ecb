//! Dynamic reverse-mode tape. One tape records one forward pass and is
//! consumed by [`Tape::backward`].

use std::collections::HashMap;

use super::conv::{self, ConvSpec, Wants};
use super::graph::Graph;
use super::kernels as k;
use super::params::{ParamId, ParamStore};
use super::tensor::{Shape, Tensor4};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Leaf,
    Param(ParamId),
    Conv { x: Var, w: Var, b: Var, spec: ConvSpec },
    ConvT { x: Var, w: Var, b: Var, spec: ConvSpec },
    PRelu { x: Var, slope: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Concat { parts: Vec<Var>, axis: usize },
    Reshape(Var),
    Softmax { x: Var, axis: usize },
    SumAxis { x: Var, axis: usize },
    Mse(Var, Var),
    L1(Var, Var),
}

#[derive(Debug)]
struct Node {
    shape: Shape,
    // `None` for parameter leaves, whose data stays in the store.
    value: Option<Vec<f32>>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Grads {
    params: Vec<Option<Vec<f32>>>,
    leaves: HashMap<Var, Vec<f32>>,
}

impl Grads {
    pub fn param(&self, id: ParamId) -> Option<&[f32]> {
        self.params.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f32])> {
        self.params
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (ParamId(i), g)))
    }

    /// Gradient of a leaf created with [`Tape::leaf`].
    pub fn wrt(&self, v: Var) -> Option<&[f32]> {
        self.leaves.get(&v).map(Vec::as_slice)
    }
}

fn accumulate(slot: &mut Option<Vec<f32>>, g: Vec<f32>) {
    match slot {
        Some(s) => s.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

fn finite(op: &'static str, data: &[f32]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf whose gradient is reported by [`Grads::wrt`].
    pub fn leaf(&mut self, t: Tensor4) -> Var {
        self.push_owned(t.shape(), t.into_data(), Op::Leaf, true)
    }

    fn push_owned(&mut self, shape: Shape, data: Vec<f32>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.numel(), data.len());
        self.nodes.push(Node {
            shape,
            value: Some(data),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, name: &'static str, shape: Shape, data: Vec<f32>, op: Op, inputs: &[Var]) -> Result<Var> {
        finite(name, &data)?;
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push_owned(shape, data, op, needs_grad))
    }

    fn node_data(&self, v: Var) -> &[f32] {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(d), _) => d,
            (None, Op::Param(id)) => self.store.get(*id).data(),
            _ => unreachable!("only parameter nodes borrow their data"),
        }
    }

    pub fn value(&self, v: Var) -> &[f32] {
        self.node_data(v)
    }

    pub fn scalar(&self, v: Var) -> f32 {
        self.node_data(v)[0]
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Runs reverse-mode differentiation from the scalar `loss`, consuming the tape.
    pub fn backward(mut self, loss: Var) -> Result<Grads> {
        let ls = self.nodes[loss.0].shape;
        if ls.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be a scalar, got shape {ls}"),
            ));
        }
        let mut out = Grads {
            params: vec![None; self.store.len()],
            leaves: HashMap::new(),
        };
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Constant);
            let dy = grads[i].take().filter(|_| self.nodes[i].needs_grad);
            if let Some(dy) = dy {
                self.propagate(i, &op, dy, &mut grads, &mut out);
            }
            // Every consumer of node `i` has already been visited.
            self.nodes[i].value = None;
        }
        Ok(out)
    }

    fn propagate(
        &self,
        i: usize,
        op: &Op,
        dy: Vec<f32>,
        grads: &mut [Option<Vec<f32>>],
        out: &mut Grads,
    ) {
            match op {
                Op::Constant => {}
                Op::Leaf => {
                    out.leaves.insert(Var(i), dy);
                }
                Op::Param(id) => accumulate(&mut out.params[id.0], dy),
                Op::Conv { x, w, b, spec } | Op::ConvT { x, w, b, spec } => {
                    let wants = Wants {
                        input: self.needs(*x),
                        weight: self.needs(*w),
                        bias: self.needs(*b),
                    };
                    let xs = self.nodes[x.0].shape;
                    let g = if matches!(op, Op::Conv { .. }) {
                        conv::conv2d_backward(&dy, self.node_data(*x), xs, self.node_data(*w), spec, wants)
                    } else {
                        conv::conv_transpose2d_backward(&dy, self.node_data(*x), xs, self.node_data(*w), spec, wants)
                    };
                    if let Some(d) = g.input {
                        accumulate(&mut grads[x.0], d);
                    }
                    if let Some(d) = g.weight {
                        accumulate(&mut grads[w.0], d);
                    }
                    if let Some(d) = g.bias {
                        accumulate(&mut grads[b.0], d);
                    }
                }
                Op::PRelu { x, slope } => {
                    let (dx, da) = k::prelu_backward(
                        &dy,
                        self.node_data(*x),
                        self.nodes[x.0].shape,
                        self.node_data(*slope),
                        self.needs(*x),
                        self.needs(*slope),
                    );
                    if let Some(d) = dx {
                        accumulate(&mut grads[x.0], d);
                    }
                    if let Some(d) = da {
                        accumulate(&mut grads[slope.0], d);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], dy.clone());
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], dy);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], dy.iter().map(|v| -v).collect());
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], dy);
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        let d = k::zip_map(&dy, self.node_data(*b), |g, y| g * y);
                        accumulate(&mut grads[a.0], d);
                    }
                    if self.needs(*b) {
                        let d = k::zip_map(&dy, self.node_data(*a), |g, x| g * x);
                        accumulate(&mut grads[b.0], d);
                    }
                }
                Op::Concat { parts, axis } => {
                    let shapes: Vec<Shape> = parts.iter().map(|p| self.nodes[p.0].shape).collect();
                    for (p, d) in parts.iter().zip(k::concat_backward(&dy, &shapes, *axis)) {
                        if self.needs(*p) {
                            accumulate(&mut grads[p.0], d);
                        }
                    }
                }
                Op::Reshape(x) => accumulate(&mut grads[x.0], dy),
                Op::Softmax { x, axis } => {
                    let y = self.nodes[i].value.as_deref().expect("owned output");
                    let d = k::softmax_backward(&dy, y, self.nodes[i].shape, *axis);
                    accumulate(&mut grads[x.0], d);
                }
                Op::SumAxis { x, axis } => {
                    let d = k::sum_axis_backward(&dy, self.nodes[x.0].shape, *axis);
                    accumulate(&mut grads[x.0], d);
                }
                Op::Mse(a, b) | Op::L1(a, b) => {
                    let (pa, pb) = (self.node_data(*a), self.node_data(*b));
                    let ga = if matches!(op, Op::Mse(..)) {
                        k::mse_grad(pa, pb, dy[0])
                    } else {
                        k::l1_grad(pa, pb, dy[0])
                    };
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], ga.iter().map(|v| -v).collect());
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], ga);
                    }
                }
            }
    }
}

impl<'p> Graph for Tape<'p> {
    type Value = Var;

    fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(&id) {
            return *v;
        }
        let t = self.store.get(id);
        self.nodes.push(Node {
            shape: t.shape(),
            value: None,
            op: Op::Param(id),
            needs_grad: t.requires_grad,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    fn constant(&mut self, t: Tensor4) -> Var {
        self.push_owned(t.shape(), t.into_data(), Op::Constant, false)
    }

    fn shape(&self, v: &Var) -> Shape {
        self.nodes[v.0].shape
    }

    fn data<'a>(&'a self, v: &'a Var) -> &'a [f32] {
        self.node_data(*v)
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var, spec: &ConvSpec) -> Result<Var> {
        let (y, ys) = conv::conv2d_forward(
            self.node_data(*x),
            self.nodes[x.0].shape,
            self.node_data(*w),
            self.node_data(*b),
            spec,
        )?;
        self.push_op("conv2d", ys, y, Op::Conv { x: *x, w: *w, b: *b, spec: *spec }, &[*x, *w, *b])
    }

    fn conv_transpose2d(&mut self, x: &Var, w: &Var, b: &Var, spec: &ConvSpec) -> Result<Var> {
        let (y, ys) = conv::conv_transpose2d_forward(
            self.node_data(*x),
            self.nodes[x.0].shape,
            self.node_data(*w),
            self.node_data(*b),
            spec,
        )?;
        self.push_op(
            "conv_transpose2d",
            ys,
            y,
            Op::ConvT { x: *x, w: *w, b: *b, spec: *spec },
            &[*x, *w, *b],
        )
    }

    fn prelu(&mut self, x: &Var, slope: &Var) -> Result<Var> {
        let xs = self.nodes[x.0].shape;
        let y = k::prelu_forward(self.node_data(*x), xs, self.node_data(*slope))?;
        self.push_op("prelu", xs, y, Op::PRelu { x: *x, slope: *slope }, &[*x, *slope])
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let s = self.nodes[a.0].shape;
        k::check_same("add", s, self.nodes[b.0].shape)?;
        let y = k::zip_map(self.node_data(*a), self.node_data(*b), |x, y| x + y);
        self.push_op("add", s, y, Op::Add(*a, *b), &[*a, *b])
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let s = self.nodes[a.0].shape;
        k::check_same("sub", s, self.nodes[b.0].shape)?;
        let y = k::zip_map(self.node_data(*a), self.node_data(*b), |x, y| x - y);
        self.push_op("sub", s, y, Op::Sub(*a, *b), &[*a, *b])
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let s = self.nodes[a.0].shape;
        k::check_same("mul", s, self.nodes[b.0].shape)?;
        let y = k::zip_map(self.node_data(*a), self.node_data(*b), |x, y| x * y);
        self.push_op("mul", s, y, Op::Mul(*a, *b), &[*a, *b])
    }

    fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let views: Vec<(&[f32], Shape)> = parts
            .iter()
            .map(|p| (self.node_data(*p), self.nodes[p.0].shape))
            .collect();
        let (y, s) = k::concat_forward(&views, axis)?;
        self.push_op("concat", s, y, Op::Concat { parts: parts.to_vec(), axis }, parts)
    }

    fn reshape(&mut self, x: &Var, shape: Shape) -> Result<Var> {
        let xs = self.nodes[x.0].shape;
        if xs.numel() != shape.numel() {
            return Err(Error::shape("reshape", format!("cannot view {xs} as {shape}")));
        }
        let y = self.node_data(*x).to_vec();
        self.push_op("reshape", shape, y, Op::Reshape(*x), &[*x])
    }

    fn softmax(&mut self, x: &Var, axis: usize) -> Result<Var> {
        k::check_axis("softmax", axis)?;
        let xs = self.nodes[x.0].shape;
        let y = k::softmax_forward(self.node_data(*x), xs, axis);
        self.push_op("softmax", xs, y, Op::Softmax { x: *x, axis }, &[*x])
    }

    fn sum_axis(&mut self, x: &Var, axis: usize) -> Result<Var> {
        k::check_axis("sum_axis", axis)?;
        let (y, s) = k::sum_axis_forward(self.node_data(*x), self.nodes[x.0].shape, axis);
        self.push_op("sum_axis", s, y, Op::SumAxis { x: *x, axis }, &[*x])
    }

    fn mse_loss(&mut self, pred: &Var, target: &Var) -> Result<Var> {
        k::check_same("mse_loss", self.nodes[pred.0].shape, self.nodes[target.0].shape)?;
        let v = k::mse(self.node_data(*pred), self.node_data(*target));
        self.push_op("mse_loss", Shape::scalar(), vec![v], Op::Mse(*pred, *target), &[*pred, *target])
    }

    fn l1_loss(&mut self, pred: &Var, target: &Var) -> Result<Var> {
        k::check_same("l1_loss", self.nodes[pred.0].shape, self.nodes[target.0].shape)?;
        let v = k::l1(self.node_data(*pred), self.node_data(*target));
        self.push_op("l1_loss", Shape::scalar(), vec![v], Op::L1(*pred, *target), &[*pred, *target])
    }
}
