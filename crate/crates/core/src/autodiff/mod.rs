//! Minimal reverse-mode automatic differentiation over 4-D `f32` arrays,
//! restricted to the operators the network needs, plus Adam and He
//! initialisation.
//!
//! All kernels run on the calling thread with a fixed reduction order, so a
//! fixed seed gives bit-identical forward, backward and update results.

pub mod checkpoint;
pub mod conv;
mod eager;
mod gemm;
mod graph;
pub mod kernels;
pub mod optim;
mod params;
mod tape;
mod tensor;

pub use conv::ConvSpec;
pub use eager::{Eager, EagerValue};
pub use graph::Graph;
pub use optim::{Adam, AdamConfig, AdamState, StepReport, WeightDecayMode};
pub use params::{he_init, he_normal, scaled_normal, Param, ParamId, ParamStore};
pub use tape::{Grads, Tape, Var};
pub use tensor::{Shape, Tensor4};
