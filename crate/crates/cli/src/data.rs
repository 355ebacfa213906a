//! Loading a cohort from the files named in a run config.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use affistack::ingest::{
    parse_labels, parse_partitions, parse_score_table, parse_sdf, Cohort, Molecule, PoseSet, ScoringFunction,
    TableGroup,
};
use affistack::pose_rmsd::{filter_complex, FilterMode, FilterResult};
use affistack::seed::content_hash;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::CliError;

/// Hashes of every input file, keyed by path relative to the config.
pub type InputHashes = BTreeMap<String, String>;

pub struct LoadedData {
    pub cohort: Cohort,
    pub hashes: InputHashes,
    /// Per-complex hard failures (unreadable or malformed files).
    pub errors: Vec<(String, String)>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// `Ok(None)` when the file is absent; the caller decides what that means.
fn read_optional(path: &Path) -> Result<Option<String>, String> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(format!("cannot read {}: {e}", path.display())),
    }
}

struct ComplexFiles {
    ligand: Option<Molecule>,
    experimental: Option<Molecule>,
    smina: PoseSet,
    vinardo: PoseSet,
    hashes: Vec<(String, String)>,
}

fn first_molecule(path: &Path, rel: String, hashes: &mut Vec<(String, String)>) -> Result<Option<Molecule>, String> {
    match read_optional(path)? {
        None => Ok(None),
        Some(text) => {
            hashes.push((rel, content_hash(text.as_bytes())));
            let mols = parse_sdf(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            Ok(mols.into_iter().next())
        }
    }
}

fn pose_set(
    cfg: &RunConfig,
    id: &str,
    tool: ScoringFunction,
    hashes: &mut Vec<(String, String)>,
) -> Result<PoseSet, String> {
    let name = format!("{id}_{tool}.sdf");
    let path = cfg.resolve(&cfg.poses_dir).join(&name);
    match read_optional(&path)? {
        // Missing or empty output means the docking run failed.
        None => Ok(PoseSet::failed(id, tool)),
        Some(text) => {
            hashes.push((format!("{}/{name}", cfg.poses_dir.display()), content_hash(text.as_bytes())));
            let mols = parse_sdf(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if mols.is_empty() {
                return Ok(PoseSet::failed(id, tool));
            }
            PoseSet::from_sdf_records(id, tool, mols).map_err(|e| format!("{}: {e}", path.display()))
        }
    }
}

fn load_complex(cfg: &RunConfig, id: &str) -> Result<ComplexFiles, String> {
    let mut hashes = Vec::new();
    let lig_name = format!("{id}_ligand.sdf");
    let ligand = first_molecule(
        &cfg.resolve(&cfg.ligands_dir).join(&lig_name),
        format!("{}/{lig_name}", cfg.ligands_dir.display()),
        &mut hashes,
    )?;
    let experimental = match &cfg.experimental_dir {
        None => ligand.clone(),
        Some(dir) => first_molecule(
            &cfg.experimental_dir().join(&lig_name),
            format!("{}/{lig_name}", dir.display()),
            &mut hashes,
        )?,
    };
    let smina = pose_set(cfg, id, ScoringFunction::Smina, &mut hashes)?;
    let vinardo = pose_set(cfg, id, ScoringFunction::Vinardo, &mut hashes)?;
    Ok(ComplexFiles {
        ligand,
        experimental,
        smina,
        vinardo,
        hashes,
    })
}

/// Read labels, partitions, structures and score tables, and run both pose
/// filters on every complex.
pub fn load(cfg: &RunConfig) -> Result<LoadedData, CliError> {
    let mut hashes = InputHashes::new();
    let labels_text = read(&cfg.resolve(&cfg.labels))?;
    hashes.insert(cfg.labels.display().to_string(), content_hash(labels_text.as_bytes()));
    let part_text = read(&cfg.resolve(&cfg.partitions))?;
    hashes.insert(cfg.partitions.display().to_string(), content_hash(part_text.as_bytes()));
    let labels = parse_labels(&labels_text)?;
    let partitions = parse_partitions(&part_text)?;
    let mut cohort = Cohort::from_labels(labels, &partitions)?;

    for (group, path) in &cfg.score_tables {
        let group: TableGroup = group.parse()?;
        let text = read(&cfg.resolve(path))?;
        hashes.insert(path.display().to_string(), content_hash(text.as_bytes()));
        let table = parse_score_table(&text, group).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        cohort.add_table(table);
    }

    let ids: Vec<String> = cohort.records().map(|(id, _)| id.to_string()).collect();
    let loaded: Vec<(String, Result<ComplexFiles, String>)> =
        ids.par_iter().map(|id| (id.clone(), load_complex(cfg, id))).collect();
    let mut errors = Vec::new();
    for (id, result) in loaded {
        match result {
            Err(e) => errors.push((id, e)),
            Ok(files) => {
                hashes.extend(files.hashes);
                let rec = cohort.get_mut(&id).expect("id from cohort");
                if let Some(lig) = files.ligand {
                    rec.set_ligand(lig)?;
                }
                rec.experimental_pose = files.experimental;
                rec.pose_sets.insert(ScoringFunction::Smina, files.smina);
                rec.pose_sets.insert(ScoringFunction::Vinardo, files.vinardo);
            }
        }
    }

    let results: Vec<Result<Vec<FilterResult>, (String, String)>> = cohort
        .records()
        .collect::<Vec<_>>()
        .par_iter()
        .filter(|(_, rec)| rec.pose_sets.len() == 2)
        .map(|(id, rec)| {
            let smina = &rec.pose_sets[&ScoringFunction::Smina];
            let vinardo = &rec.pose_sets[&ScoringFunction::Vinardo];
            [FilterMode::Experimental, FilterMode::Consensus]
                .into_iter()
                .map(|mode| filter_complex(mode, smina, vinardo, rec.experimental_pose.as_ref()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| (id.to_string(), e.to_string()))
        })
        .collect();
    for r in results {
        match r {
            Ok(frs) => cohort.attach_filter_results(frs),
            Err(e) => errors.push(e),
        }
    }
    errors.sort();
    Ok(LoadedData { cohort, hashes, errors })
}

/// Single digest over all input hashes.
pub fn combined_hash(hashes: &InputHashes) -> String {
    let mut text = String::new();
    for (k, v) in hashes {
        text.push_str(k);
        text.push('\t');
        text.push_str(v);
        text.push('\n');
    }
    content_hash(text.as_bytes())
}
