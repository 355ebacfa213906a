//! Element-typed symmetric RMSD and the two pose-selection filters.
//!
//! The asymmetric distance from `a` to `b` pairs every heavy atom of `a`
//! with its nearest heavy atom of the same element in `b`; the symmetric
//! RMSD is the larger of the two directions. Coordinates are compared as
//! given, with no superposition.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{Cohort, Molecule, Partition, PoseSet, ScoringFunction};
use crate::{Error, Result};

/// RMSD assigned when no pose (or pose pair) passes the cutoff.
pub const SENTINEL_RMSD: f64 = 100.0;
/// Geometric cutoff used while selecting poses.
pub const POSE_CUTOFF: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FilterMode {
    /// Poses compared against the experimental ligand structure.
    Experimental,
    /// SMINA poses compared against Vinardo poses.
    Consensus,
}

impl FilterMode {
    /// Tag used in file and model names.
    pub fn tag(self) -> &'static str {
        match self {
            FilterMode::Experimental => "RelExpt",
            FilterMode::Consensus => "VvS",
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relexpt" | "experimental" | "expt" => Ok(FilterMode::Experimental),
            "vvs" | "consensus" => Ok(FilterMode::Consensus),
            _ => Err(Error::invalid(format!("unknown RMSD filter mode `{s}`"))),
        }
    }
}

/// Training-set RMSD cutoff. Only three values are meaningful: 101 keeps
/// everything, 100 drops sentinel records, 3 keeps good poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cutoff {
    #[serde(rename = "101.0")]
    Unfiltered,
    #[serde(rename = "100.0")]
    DropSentinel,
    #[serde(rename = "3.0")]
    Strict,
}

impl Cutoff {
    pub const ALL: [Cutoff; 3] = [Cutoff::Unfiltered, Cutoff::DropSentinel, Cutoff::Strict];

    pub fn angstroms(self) -> f64 {
        match self {
            Cutoff::Unfiltered => 101.0,
            Cutoff::DropSentinel => 100.0,
            Cutoff::Strict => 3.0,
        }
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.angstroms())
    }
}

impl FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad cutoff `{s}`")))?;
        Cutoff::ALL
            .into_iter()
            .find(|c| c.angstroms() == v)
            .ok_or_else(|| Error::invalid(format!("cutoff must be one of 101, 100, 3 (got {s})")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RmsdFilterMode {
    pub mode: FilterMode,
    pub cutoff: Cutoff,
}

impl RmsdFilterMode {
    pub fn new(mode: FilterMode, cutoff: Cutoff) -> Self {
        RmsdFilterMode { mode, cutoff }
    }
}

impl fmt::Display for RmsdFilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.mode, self.cutoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPose {
    pub complex_id: String,
    pub scoring_function: ScoringFunction,
    pub chosen_rank: usize,
    pub energy: f64,
    /// Angstroms; exactly [`SENTINEL_RMSD`] when nothing passed the cutoff.
    pub rmsd: f64,
}

/// Outcome of filtering one complex under one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub complex_id: String,
    pub mode: FilterMode,
    pub smina: SelectedPose,
    pub vinardo: SelectedPose,
    /// Complex-level RMSD used by the training cutoff. For consensus this is
    /// the pair RMSD; for experimental it is the larger of the two tools.
    pub rmsd: f64,
}

impl FilterResult {
    pub fn energy(&self, sf: ScoringFunction) -> f64 {
        match sf {
            ScoringFunction::Smina => self.smina.energy,
            ScoringFunction::Vinardo => self.vinardo.energy,
        }
    }
}

fn group_by_element(m: &Molecule) -> HashMap<&str, Vec<[f64; 3]>> {
    let mut map: HashMap<&str, Vec<[f64; 3]>> = HashMap::new();
    for atom in m.heavy_atoms() {
        map.entry(atom.element.as_str()).or_default().push(atom.position);
    }
    map
}

fn sq_dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Root mean of squared nearest same-element distances from `a`'s heavy atoms into `b`.
pub fn asymmetric_rmsd(a: &Molecule, b: &Molecule) -> Result<f64> {
    let targets = group_by_element(b);
    let mut sum = 0.0;
    let mut n = 0usize;
    for atom in a.heavy_atoms() {
        let candidates = targets.get(atom.element.as_str()).ok_or_else(|| {
            Error::invalid(format!(
                "element {} of `{}` has no counterpart in `{}`",
                atom.element, a.source_id, b.source_id
            ))
        })?;
        let nearest = candidates
            .iter()
            .map(|&q| sq_dist(atom.position, q))
            .fold(f64::INFINITY, f64::min);
        sum += nearest;
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid(format!("`{}` has no heavy atoms", a.source_id)));
    }
    Ok((sum / n as f64).sqrt())
}

/// Larger of the two asymmetric distances.
pub fn symmetric_rmsd(a: &Molecule, b: &Molecule) -> Result<f64> {
    Ok(asymmetric_rmsd(a, b)?.max(asymmetric_rmsd(b, a)?))
}

/// Index of the lowest-energy entry with `rmsd < cutoff` (ties: lower index).
pub fn select_experimental(energies: &[f64], rmsds: &[f64], cutoff: f64) -> Option<usize> {
    energies
        .iter()
        .zip(rmsds)
        .enumerate()
        .filter(|(_, (_, &r))| r < cutoff)
        .min_by(|(i, (e1, _)), (j, (e2, _))| e1.total_cmp(e2).then(i.cmp(j)))
        .map(|(i, _)| i)
}

/// Pick the `(smina_rank, vinardo_rank)` pair with `rmsd < cutoff` and the
/// smallest rank sum, breaking ties by lower RMSD and then by lower SMINA rank.
pub fn select_consensus_pair(rmsd: &[Vec<f64>], cutoff: f64) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, row) in rmsd.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r >= cutoff {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bj, br)) => (i + j, r, i) < (bi + bj, br, bi),
            };
            if better {
                best = Some((i, j, r));
            }
        }
    }
    best
}

fn fallback(poses: &PoseSet) -> SelectedPose {
    SelectedPose {
        complex_id: poses.complex_id.clone(),
        scoring_function: poses.scoring_function,
        chosen_rank: 0,
        // A tool that produced nothing scores 0, which downstream filters treat as failure.
        energy: poses.poses().first().map_or(0.0, |p| p.energy),
        rmsd: SENTINEL_RMSD,
    }
}

fn require_poses(poses: &PoseSet) -> Result<()> {
    if poses.is_empty() && !poses.failed {
        return Err(Error::invalid(format!(
            "{}/{}: empty pose set",
            poses.complex_id, poses.scoring_function
        )));
    }
    Ok(())
}

/// Lowest-energy pose within `cutoff` of the experimental structure, or the
/// rank-0 pose with the sentinel RMSD. A missing experimental structure
/// counts as a failure.
pub fn experimental_filter(poses: &PoseSet, expt: Option<&Molecule>, cutoff: f64) -> Result<SelectedPose> {
    require_poses(poses)?;
    let expt = match expt {
        Some(e) if !poses.failed => e,
        _ => return Ok(fallback(poses)),
    };
    let energies: Vec<f64> = poses.poses().iter().map(|p| p.energy).collect();
    let rmsds = poses
        .poses()
        .iter()
        .map(|p| symmetric_rmsd(&p.molecule, expt))
        .collect::<Result<Vec<_>>>()?;
    Ok(match select_experimental(&energies, &rmsds, cutoff) {
        Some(i) => SelectedPose {
            complex_id: poses.complex_id.clone(),
            scoring_function: poses.scoring_function,
            chosen_rank: poses.poses()[i].rank,
            energy: energies[i],
            rmsd: rmsds[i],
        },
        None => fallback(poses),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusSelection {
    pub smina: SelectedPose,
    pub vinardo: SelectedPose,
    pub pair_rmsd: f64,
}

/// Agreement filter between SMINA and Vinardo poses of the same complex.
pub fn consensus_filter(smina: &PoseSet, vinardo: &PoseSet, cutoff: f64) -> Result<ConsensusSelection> {
    if smina.complex_id != vinardo.complex_id {
        return Err(Error::invalid(format!(
            "pose sets belong to different complexes: `{}` vs `{}`",
            smina.complex_id, vinardo.complex_id
        )));
    }
    require_poses(smina)?;
    require_poses(vinardo)?;
    let sentinel = || ConsensusSelection {
        smina: fallback(smina),
        vinardo: fallback(vinardo),
        pair_rmsd: SENTINEL_RMSD,
    };
    if smina.failed || vinardo.failed {
        return Ok(sentinel());
    }
    let matrix = smina
        .poses()
        .iter()
        .map(|s| {
            vinardo
                .poses()
                .iter()
                .map(|v| symmetric_rmsd(&s.molecule, &v.molecule))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match select_consensus_pair(&matrix, cutoff) {
        Some((i, j, r)) => {
            let pick = |set: &PoseSet, k: usize| SelectedPose {
                complex_id: set.complex_id.clone(),
                scoring_function: set.scoring_function,
                chosen_rank: set.poses()[k].rank,
                energy: set.poses()[k].energy,
                rmsd: r,
            };
            ConsensusSelection {
                smina: pick(smina, i),
                vinardo: pick(vinardo, j),
                pair_rmsd: r,
            }
        }
        None => sentinel(),
    })
}

/// Run one filter mode on a complex's pose sets.
pub fn filter_complex(
    mode: FilterMode,
    smina: &PoseSet,
    vinardo: &PoseSet,
    expt: Option<&Molecule>,
) -> Result<FilterResult> {
    match mode {
        FilterMode::Consensus => {
            let sel = consensus_filter(smina, vinardo, POSE_CUTOFF)?;
            Ok(FilterResult {
                complex_id: smina.complex_id.clone(),
                mode,
                smina: sel.smina,
                vinardo: sel.vinardo,
                rmsd: sel.pair_rmsd,
            })
        }
        FilterMode::Experimental => {
            let s = experimental_filter(smina, expt, POSE_CUTOFF)?;
            let v = experimental_filter(vinardo, expt, POSE_CUTOFF)?;
            let rmsd = s.rmsd.max(v.rmsd);
            Ok(FilterResult {
                complex_id: smina.complex_id.clone(),
                mode,
                smina: s,
                vinardo: v,
                rmsd,
            })
        }
    }
}

/// Keep TRAIN records whose recorded RMSD is strictly below the cutoff.
/// Records of every other partition pass through untouched.
pub fn apply_rmsd_cutoff(cohort: &Cohort, mode: RmsdFilterMode) -> Result<Cohort> {
    let mut missing = Vec::new();
    let kept = cohort.filter_records(|id, rec| {
        if rec.partition != Partition::Train {
            return true;
        }
        match rec.filter_results.get(&mode.mode) {
            Some(fr) => fr.rmsd < mode.cutoff.angstroms(),
            None => {
                missing.push(id.to_string());
                false
            }
        }
    });
    if !missing.is_empty() {
        return Err(Error::missing(format!("{} filter result", mode.mode), missing));
    }
    Ok(kept)
}

pub const FILTER_TABLE_HEADER: &str =
    "complex_id\tmode\tcutoff\tsmina_rank\tsmina_energy\tvinardo_rank\tvinardo_energy\trmsd";

/// File name for a filter-result table, e.g. `scores_VvS_3.0.tsv`.
pub fn filter_table_name(mode: FilterMode) -> String {
    format!("scores_{}_{:.1}.tsv", mode.tag(), POSE_CUTOFF)
}

pub fn write_filter_table(results: &[FilterResult]) -> String {
    let mut out = format!("{FILTER_TABLE_HEADER}\n");
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.1}\t{}\t{}\t{}\t{}\t{}",
            r.complex_id,
            r.mode.tag(),
            POSE_CUTOFF,
            r.smina.chosen_rank,
            r.smina.energy,
            r.vinardo.chosen_rank,
            r.vinardo.energy,
            r.rmsd
        );
    }
    out
}

pub fn parse_filter_table(text: &str) -> Result<BTreeMap<String, FilterResult>> {
    let mut out = BTreeMap::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim_end() == FILTER_TABLE_HEADER => {}
        _ => {
            return Err(Error::Table {
                row: 1,
                message: "unexpected filter-table header".into(),
            })
        }
    }
    for (i, line) in lines {
        let row = i + 1;
        let bad = |message: String| Error::Table { row, message };
        let c: Vec<&str> = line.trim_end().split('\t').collect();
        if c.len() != 8 {
            return Err(bad(format!("expected 8 cells, found {}", c.len())));
        }
        let mode: FilterMode = c[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("non-numeric cell `{s}`")));
        let rank = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad rank `{s}`")));
        let rmsd = num(c[7])?;
        let id = c[0].to_string();
        let (smina_rmsd, vinardo_rmsd) = (rmsd, rmsd);
        let result = FilterResult {
            complex_id: id.clone(),
            mode,
            smina: SelectedPose {
                complex_id: id.clone(),
                scoring_function: ScoringFunction::Smina,
                chosen_rank: rank(c[3])?,
                energy: num(c[4])?,
                rmsd: smina_rmsd,
            },
            vinardo: SelectedPose {
                complex_id: id.clone(),
                scoring_function: ScoringFunction::Vinardo,
                chosen_rank: rank(c[5])?,
                energy: num(c[6])?,
                rmsd: vinardo_rmsd,
            },
            rmsd,
        };
        if out.insert(id.clone(), result).is_some() {
            return Err(bad(format!("duplicate complex id `{id}`")));
        }
    }
    Ok(out)
}
