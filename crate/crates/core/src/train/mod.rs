//! Training loop, checkpoints, evaluation and ablation drivers.

pub mod ablate;
pub mod config;
pub mod data;
pub mod evaluate;
pub mod trainer;

pub use ablate::{ablate, AblationAxis, AblationReport, AblationRow};
pub use config::{BatchSchedule, LossKind, TrainConfig};
pub use data::TrainingData;
pub use evaluate::{
    checkpoint_scale, evaluate_dataset, load_model, pre_upsample, report_paths, super_resolve, write_reports, EvalOptions,
};
pub use trainer::{read_loss_log, step_checkpoint_name, TrainOutcome, Trainer, FINAL_CHECKPOINT, LOSS_LOG};
