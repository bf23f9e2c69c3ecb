//! Learned back-projection blocks and the classical iterative refiner.

pub mod classical;
pub mod layers;
mod projection;

pub use classical::{classical_back_projection, BackProjectionResult};
pub use layers::{Conv, Init, PRelu, ParamBuilder, PRELU_INIT};
pub use projection::{dbp_forward, ubp_forward, BackProjectionBlock, Direction, Traced};
