use std::ops::Deref;
use std::rc::Rc;

use super::conv::{self, ConvSpec};
use super::graph::Graph;
use super::kernels as k;
use super::params::{ParamId, ParamStore};
use super::tensor::{Shape, Tensor4};
use crate::error::{Error, Result};

/// Value handle of the eager evaluator: parameters are borrowed from the
/// store, intermediates are reference counted and dropped with their last handle.
#[derive(Debug, Clone)]
pub enum EagerValue<'p> {
    Borrowed(&'p Tensor4),
    Shared(Rc<Tensor4>),
}

impl Deref for EagerValue<'_> {
    type Target = Tensor4;

    fn deref(&self) -> &Tensor4 {
        match self {
            EagerValue::Borrowed(t) => t,
            EagerValue::Shared(t) => t,
        }
    }
}

/// Gradient-free evaluator for inference.
pub struct Eager<'p> {
    store: &'p ParamStore,
}

impl<'p> Eager<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Eager { store }
    }
}

fn wrap<'p>(op: &'static str, shape: Shape, data: Vec<f32>) -> Result<EagerValue<'p>> {
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { op });
    }
    Ok(EagerValue::Shared(Rc::new(Tensor4::from_vec(shape, data)?)))
}

impl<'p> Graph for Eager<'p> {
    type Value = EagerValue<'p>;

    fn param(&mut self, id: ParamId) -> Self::Value {
        EagerValue::Borrowed(self.store.get(id))
    }

    fn constant(&mut self, t: Tensor4) -> Self::Value {
        EagerValue::Shared(Rc::new(t))
    }

    fn shape(&self, v: &Self::Value) -> Shape {
        v.shape()
    }

    fn data<'a>(&'a self, v: &'a Self::Value) -> &'a [f32] {
        v.data()
    }

    fn conv2d(&mut self, x: &Self::Value, w: &Self::Value, b: &Self::Value, spec: &ConvSpec) -> Result<Self::Value> {
        let (y, s) = conv::conv2d_forward(x.data(), x.shape(), w.data(), b.data(), spec)?;
        wrap("conv2d", s, y)
    }

    fn conv_transpose2d(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: &Self::Value,
        spec: &ConvSpec,
    ) -> Result<Self::Value> {
        let (y, s) = conv::conv_transpose2d_forward(x.data(), x.shape(), w.data(), b.data(), spec)?;
        wrap("conv_transpose2d", s, y)
    }

    fn prelu(&mut self, x: &Self::Value, slope: &Self::Value) -> Result<Self::Value> {
        let y = k::prelu_forward(x.data(), x.shape(), slope.data())?;
        wrap("prelu", x.shape(), y)
    }

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        k::check_same("add", a.shape(), b.shape())?;
        wrap("add", a.shape(), k::zip_map(a.data(), b.data(), |x, y| x + y))
    }

    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        k::check_same("sub", a.shape(), b.shape())?;
        wrap("sub", a.shape(), k::zip_map(a.data(), b.data(), |x, y| x - y))
    }

    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        k::check_same("mul", a.shape(), b.shape())?;
        wrap("mul", a.shape(), k::zip_map(a.data(), b.data(), |x, y| x * y))
    }

    fn concat(&mut self, parts: &[Self::Value], axis: usize) -> Result<Self::Value> {
        let views: Vec<(&[f32], Shape)> = parts.iter().map(|p| (p.data(), p.shape())).collect();
        let (y, s) = k::concat_forward(&views, axis)?;
        wrap("concat", s, y)
    }

    fn reshape(&mut self, x: &Self::Value, shape: Shape) -> Result<Self::Value> {
        let t = Tensor4::clone(x).reshape(shape)?;
        Ok(EagerValue::Shared(Rc::new(t)))
    }

    fn softmax(&mut self, x: &Self::Value, axis: usize) -> Result<Self::Value> {
        k::check_axis("softmax", axis)?;
        wrap("softmax", x.shape(), k::softmax_forward(x.data(), x.shape(), axis))
    }

    fn sum_axis(&mut self, x: &Self::Value, axis: usize) -> Result<Self::Value> {
        k::check_axis("sum_axis", axis)?;
        let (y, s) = k::sum_axis_forward(x.data(), x.shape(), axis);
        wrap("sum_axis", s, y)
    }

    fn mse_loss(&mut self, pred: &Self::Value, target: &Self::Value) -> Result<Self::Value> {
        k::check_same("mse_loss", pred.shape(), target.shape())?;
        wrap("mse_loss", Shape::scalar(), vec![k::mse(pred.data(), target.data())])
    }

    fn l1_loss(&mut self, pred: &Self::Value, target: &Self::Value) -> Result<Self::Value> {
        k::check_same("l1_loss", pred.shape(), target.shape())?;
        wrap("l1_loss", Shape::scalar(), vec![k::l1(pred.data(), target.data())])
    }
}
