//! Y-channel PSNR/SSIM with border cropping, and geometric self-ensemble.

mod ensemble;
mod psnr;
mod report;
mod ssim;

pub use ensemble::{self_ensemble_infer, PassThrough, Upscaler};
pub use psnr::{crop_plane, psnr_planes, psnr_y, PSNR_CAP};
pub use report::{ImageRecord, MetricsReport};
pub use ssim::{ssim_planes, ssim_y};
