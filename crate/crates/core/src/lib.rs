//! Stacked meta-models for ligand–protein binding affinity.
//!
//! The crate covers the full path from docking output to evaluated
//! predictions:
//!
//! * [`ingest`] parses SDF poses, score tables, affinity labels and cohort metadata.
//! * [`pose_rmsd`] computes the element-typed symmetric RMSD and selects poses
//!   with the experimental and consensus filters.
//! * [`features`] assembles the meta-model feature groups.
//! * [`pca`] fits and projects principal components of base predictions.
//! * [`learners`] holds OLS, LASSO, ElasticNet and gradient-boosted trees.
//! * [`pipeline`] wires cross-validation, PC-count selection and training together.
//! * [`evaluate`] provides correlation, error, screening and hypothesis-test metrics.

pub mod error;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod learners;
pub mod pca;
pub mod pipeline;
pub mod pose_rmsd;
pub mod seed;

pub use error::{Error, Result};
