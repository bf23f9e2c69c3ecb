use super::conv::ConvSpec;
use super::params::ParamId;
use super::tensor::{Shape, Tensor4};
use crate::error::Result;

/// The operator set the network is written against.
///
/// Implemented by [`Tape`](super::Tape), which records every operation for a
/// later backward pass, and by [`Eager`](super::Eager), which evaluates
/// immediately and frees intermediates as soon as they go out of scope.
pub trait Graph {
    type Value: Clone;

    fn param(&mut self, id: ParamId) -> Self::Value;
    fn constant(&mut self, t: Tensor4) -> Self::Value;
    fn shape(&self, v: &Self::Value) -> Shape;
    fn data<'a>(&'a self, v: &'a Self::Value) -> &'a [f32];

    fn to_tensor(&self, v: &Self::Value) -> Tensor4 {
        Tensor4::from_vec(self.shape(v), self.data(v).to_vec()).expect("consistent node")
    }

    fn conv2d(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: &Self::Value,
        spec: &ConvSpec,
    ) -> Result<Self::Value>;
    fn conv_transpose2d(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: &Self::Value,
        spec: &ConvSpec,
    ) -> Result<Self::Value>;
    fn prelu(&mut self, x: &Self::Value, slope: &Self::Value) -> Result<Self::Value>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn concat(&mut self, parts: &[Self::Value], axis: usize) -> Result<Self::Value>;
    fn reshape(&mut self, x: &Self::Value, shape: Shape) -> Result<Self::Value>;
    fn softmax(&mut self, x: &Self::Value, axis: usize) -> Result<Self::Value>;
    fn sum_axis(&mut self, x: &Self::Value, axis: usize) -> Result<Self::Value>;
    fn mse_loss(&mut self, pred: &Self::Value, target: &Self::Value) -> Result<Self::Value>;
    fn l1_loss(&mut self, pred: &Self::Value, target: &Self::Value) -> Result<Self::Value>;
}
