//! Images, resampling, colour conversion, augmentation and dataset tooling.

pub mod augment;
pub mod color;
pub mod dataset;
mod image;
pub mod io;
pub mod pad;
pub mod patches;
pub mod resize;

pub use self::image::{quantize, ImageRGB};
pub use augment::{augment_x8, inverse_augment, transform, NUM_TRANSFORMS};
pub use color::rgb_to_y;
pub use dataset::{prepare_data, PrepareReport};
pub use io::{load_image, save_gray, save_image};
pub use pad::{crop_to, pad_to_multiple};
pub use patches::{degrade, extract_patches, make_pair, SamplePair};
pub use resize::{bicubic_resize, bicubic_resize_linear};
