//! Orchestration: cross-validation plans, meta-model training and prediction.

pub mod cv;
pub mod synthetic;
mod train;

pub use cv::{repeated_kfold, shuffled_folds, CvPlan, DEFAULT_FOLDS, DEFAULT_REPEATS, DEFAULT_SEED};
pub use train::{
    model_name, predict_meta, split_validation, train_meta_model, FittedMetaModel, RunManifest, TrainOptions, FORMAT_VERSION,
};
