//! Run configuration (TOML). Relative paths resolve against the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use affistack::features::FeatureGroup;
use affistack::learners::{Algorithm, Protocol};
use affistack::pose_rmsd::{Cutoff, FilterMode, RmsdFilterMode};
use affistack::evaluate::ScoreOrientation;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub labels: PathBuf,
    pub partitions: PathBuf,
    /// Holds `<id>_smina.sdf` and `<id>_vinardo.sdf`.
    pub poses_dir: PathBuf,
    /// Holds `<id>_ligand.sdf`, used for molecular weight.
    pub ligands_dir: PathBuf,
    /// Experimental structures (`<id>_ligand.sdf`); defaults to `ligands_dir`.
    pub experimental_dir: Option<PathBuf>,
    /// Table group name to TSV path.
    #[serde(default)]
    pub score_tables: BTreeMap<String, PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub screening_orientation: Option<String>,
    pub matrix: MatrixConfig,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub groups: Vec<String>,
    pub algorithms: Vec<String>,
    pub modes: Vec<String>,
    pub cutoffs: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub k_max: usize,
    pub validation_fraction: f64,
    pub sweep_protocol: Protocol,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            k_max: 22,
            validation_fraction: 0.2,
            sweep_protocol: Protocol::sweep(),
        }
    }
}

fn default_seed() -> u64 {
    1701
}

fn default_workers() -> usize {
    1
}

/// One cell of the run matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub group: FeatureGroup,
    pub mode: RmsdFilterMode,
    pub algorithm: Algorithm,
}

/// Command-line narrowing of the run matrix.
#[derive(Debug, Clone, Default)]
pub struct Narrowing {
    pub groups: Vec<String>,
    pub algorithms: Vec<String>,
    pub modes: Vec<String>,
    pub cutoffs: Vec<String>,
}

fn parse_all<T: std::str::FromStr<Err = affistack::Error>>(items: &[String]) -> Result<Vec<T>, CliError> {
    items
        .iter()
        .map(|s| s.parse().map_err(|e: affistack::Error| CliError::Config(e.to_string())))
        .collect()
}

fn narrow<T: PartialEq + Copy>(all: Vec<T>, keep: Vec<T>) -> Vec<T> {
    if keep.is_empty() {
        all
    } else {
        all.into_iter().filter(|v| keep.contains(v)).collect()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn experimental_dir(&self) -> PathBuf {
        self.resolve(self.experimental_dir.as_ref().unwrap_or(&self.ligands_dir))
    }

    pub fn orientation(&self) -> Result<ScoreOrientation, CliError> {
        match &self.screening_orientation {
            None => Ok(ScoreOrientation::default()),
            Some(s) => s.parse().map_err(|e: affistack::Error| CliError::Config(e.to_string())),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut paths = vec![&self.labels, &self.partitions, &self.poses_dir, &self.ligands_dir];
        paths.extend(self.experimental_dir.iter());
        paths.extend(self.score_tables.values());
        for p in paths {
            if !self.resolve(p).exists() {
                return Err(CliError::Config(format!("path does not exist: {}", p.display())));
            }
        }
        for g in self.score_tables.keys() {
            g.parse::<affistack::ingest::TableGroup>()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.cells(&Narrowing::default())?;
        self.orientation()?;
        Ok(())
    }

    pub fn filter_modes(&self, narrowing: &Narrowing) -> Result<Vec<FilterMode>, CliError> {
        Ok(narrow(parse_all(&self.matrix.modes)?, parse_all(&narrowing.modes)?))
    }

    /// Matrix cells in group, mode, cutoff, algorithm order.
    pub fn cells(&self, narrowing: &Narrowing) -> Result<Vec<Cell>, CliError> {
        let groups = narrow(parse_all::<FeatureGroup>(&self.matrix.groups)?, parse_all(&narrowing.groups)?);
        let algorithms = narrow(parse_all::<Algorithm>(&self.matrix.algorithms)?, parse_all(&narrowing.algorithms)?);
        let modes = self.filter_modes(narrowing)?;
        let cutoffs = narrow(parse_all::<Cutoff>(&self.matrix.cutoffs)?, parse_all(&narrowing.cutoffs)?);
        let mut cells = Vec::new();
        for &group in &groups {
            for &mode in &modes {
                for &cutoff in &cutoffs {
                    for &algorithm in &algorithms {
                        cells.push(Cell {
                            group,
                            mode: RmsdFilterMode::new(mode, cutoff),
                            algorithm,
                        });
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(CliError::Config("the run matrix is empty".into()));
        }
        Ok(cells)
    }
}
