//! Parsing and validation of external inputs.

mod cohort;
mod elements;
mod molecule;
mod poses;
mod sdf;
mod tables;

pub use cohort::{filter_general_set, Cohort, ComplexRecord, DockingScores};
pub use elements::{atomic_weight, normalize_symbol};
pub use molecule::{molecular_weight, Atom, Molecule};
pub use poses::{Pose, PoseSet, ScoringFunction, ENERGY_PROPERTY};
pub use sdf::{parse_sdf, write_sdf};
pub use tables::{
    parse_labels, parse_partitions, parse_score_table, write_score_table, AffinityLabel,
    AssayMethod, BasePredictionTable, MeasureKind, Partition, TableGroup,
};
