use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::molecule::Molecule;
use crate::{Error, Result};

/// SDF data item where smina stores the pose score.
pub const ENERGY_PROPERTY: &str = "minimizedAffinity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScoringFunction {
    Smina,
    Vinardo,
}

impl ScoringFunction {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringFunction::Smina => "smina",
            ScoringFunction::Vinardo => "vinardo",
        }
    }
}

impl fmt::Display for ScoringFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smina" => Ok(ScoringFunction::Smina),
            "vinardo" => Ok(ScoringFunction::Vinardo),
            _ => Err(Error::invalid(format!("unknown scoring function `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rank: usize,
    /// Binding score in kcal/mol.
    pub energy: f64,
    pub molecule: Molecule,
}

/// Ranked docking poses of one complex under one scoring function.
///
/// A set marked `failed` stands for a docking or structure-preparation
/// failure upstream; it may still carry poses (used only for their energies).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet {
    pub complex_id: String,
    pub scoring_function: ScoringFunction,
    poses: Vec<Pose>,
    pub failed: bool,
}

impl PoseSet {
    /// Build from `(energy, molecule)` pairs already in rank order.
    pub fn new(
        complex_id: impl Into<String>,
        scoring_function: ScoringFunction,
        ranked: Vec<(f64, Molecule)>,
    ) -> Result<Self> {
        let complex_id = complex_id.into();
        let mut poses = Vec::with_capacity(ranked.len());
        for (rank, (energy, molecule)) in ranked.into_iter().enumerate() {
            if !energy.is_finite() {
                return Err(Error::invalid(format!(
                    "{complex_id}/{scoring_function}: non-finite energy at rank {rank}"
                )));
            }
            if let Some(prev) = poses.last().map(|p: &Pose| p.energy) {
                if energy < prev {
                    return Err(Error::invalid(format!(
                        "{complex_id}/{scoring_function}: energies must be non-decreasing in rank (rank {rank}: {energy} < {prev})"
                    )));
                }
            }
            poses.push(Pose {
                rank,
                energy,
                molecule,
            });
        }
        Ok(PoseSet {
            complex_id,
            scoring_function,
            poses,
            failed: false,
        })
    }

    pub fn failed(complex_id: impl Into<String>, scoring_function: ScoringFunction) -> Self {
        PoseSet {
            complex_id: complex_id.into(),
            scoring_function,
            poses: Vec::new(),
            failed: true,
        }
    }

    /// Build from parsed SDF records, reading energies from the smina data item.
    pub fn from_sdf_records(
        complex_id: impl Into<String>,
        scoring_function: ScoringFunction,
        molecules: Vec<Molecule>,
    ) -> Result<Self> {
        let complex_id = complex_id.into();
        let ranked = molecules
            .into_iter()
            .enumerate()
            .map(|(rank, m)| {
                let energy = m
                    .properties
                    .get(ENERGY_PROPERTY)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "{complex_id}/{scoring_function}: pose {rank} lacks a numeric `{ENERGY_PROPERTY}` item"
                        ))
                    })?;
                Ok((energy, m))
            })
            .collect::<Result<Vec<_>>>()?;
        PoseSet::new(complex_id, scoring_function, ranked)
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn mark_failed(mut self) -> Self {
        self.failed = true;
        self
    }
}
