//! The hourglass module, the stacked network and its reconstruction heads.

pub mod diagnostics;
mod hourglass;
mod model;
mod reconstruct;

pub use diagnostics::{activation_percentage, diagnose, minmax_to_u8, percentage_positive, DiagnoseReport};
pub use hourglass::{hg_forward, HgOutput, HourGlassModule};
pub use model::{HbpnConfig, HbpnModel, HbpnOutput, HeadKind};
pub use reconstruct::{plain_reconstruct, wr_probabilities, wr_reconstruct};
