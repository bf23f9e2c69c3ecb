//! Hierarchical back projection network (HBPN) for single-image
//! super-resolution, built on a small self-contained autodiff engine.
//!
//! * [`autodiff`]: tensors, tape, convolution kernels, Adam, checkpoints.
//! * [`blocks`]: up/down back-projection blocks and classical iterative back projection.
//! * [`net`]: hourglass modules, the stacked model and its reconstruction heads.
//! * [`imaging`]: image I/O, bicubic resampling, augmentation, patches, datasets.
//! * [`metrics`]: Y-channel PSNR/SSIM and geometric self-ensemble.
//! * [`train`]: training loop, evaluation and ablation drivers.

pub mod autodiff;
pub mod blocks;
mod error;
pub mod imaging;
pub mod metrics;
pub mod net;
pub mod train;

pub use error::{Error, ErrorKind, Result};
