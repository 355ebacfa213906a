//! Virtual-screening enrichment: top-k recall, precision at the number of
//! actives, and active-vs-inactive distribution tests per target.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{mann_whitney_u, welch_t};
use crate::{Error, Result};

/// Which end of the score scale marks a stronger binder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreOrientation {
    /// Lower scores (energies, ln Kd) rank first.
    #[default]
    Ascending,
    Descending,
}

impl FromStr for ScoreOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ascending" | "asc" => Ok(ScoreOrientation::Ascending),
            "descending" | "desc" => Ok(ScoreOrientation::Descending),
            _ => Err(Error::invalid(format!("unknown score orientation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLigand {
    pub id: String,
    pub score: f64,
    pub active: bool,
}

fn ranked(ligands: &[ScoredLigand], orientation: ScoreOrientation) -> Vec<&ScoredLigand> {
    let mut order: Vec<&ScoredLigand> = ligands.iter().collect();
    order.sort_by(|a, b| {
        let by_score = match orientation {
            ScoreOrientation::Ascending => a.score.total_cmp(&b.score),
            ScoreOrientation::Descending => b.score.total_cmp(&a.score),
        };
        match by_score {
            Ordering::Equal => a.id.cmp(&b.id),
            other => other,
        }
    });
    order
}

/// Fraction of actives among the `k` best-ranked ligands. Ties in score are
/// broken by ligand id.
pub fn topk_recall(ligands: &[ScoredLigand], k: usize, orientation: ScoreOrientation) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > ligands.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} scored ligands",
            ligands.len()
        )));
    }
    let hits = ranked(ligands, orientation)
        .into_iter()
        .take(k)
        .filter(|l| l.active)
        .count();
    Ok(hits as f64 / k as f64)
}

/// Top-k recall with k equal to the number of actives (0 when there are none).
pub fn precision_at_actives(ligands: &[ScoredLigand], orientation: ScoreOrientation) -> Result<f64> {
    let actives = ligands.iter().filter(|l| l.active).count();
    if actives == 0 {
        return Ok(0.0);
    }
    topk_recall(ligands, actives, orientation)
}

/// Screening metrics for one target. Entries that are undefined for the
/// input (too few ligands, degenerate samples) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScreen {
    pub target: String,
    pub n_ligands: usize,
    pub n_actives: usize,
    pub top5_recall: Option<f64>,
    pub top10_recall: Option<f64>,
    pub precision_at_actives: f64,
    pub welch_t: Option<f64>,
    pub welch_p: Option<f64>,
    pub mwu_u: Option<f64>,
    pub mwu_p: Option<f64>,
}

/// Per-target report. `by_target` maps target id to its scored ligands.
pub fn screen_report(
    by_target: &BTreeMap<String, Vec<ScoredLigand>>,
    orientation: ScoreOrientation,
) -> Result<Vec<TargetScreen>> {
    by_target
        .iter()
        .map(|(target, ligands)| {
            let actives: Vec<f64> = ligands.iter().filter(|l| l.active).map(|l| l.score).collect();
            let inactives: Vec<f64> = ligands.iter().filter(|l| !l.active).map(|l| l.score).collect();
            let welch = welch_t(&actives, &inactives).ok();
            let mwu = mann_whitney_u(&actives, &inactives).ok();
            Ok(TargetScreen {
                target: target.clone(),
                n_ligands: ligands.len(),
                n_actives: actives.len(),
                top5_recall: topk_recall(ligands, 5, orientation).ok(),
                top10_recall: topk_recall(ligands, 10, orientation).ok(),
                precision_at_actives: precision_at_actives(ligands, orientation)?,
                welch_t: welch.map(|w| w.t),
                welch_p: welch.map(|w| w.p),
                mwu_u: mwu.map(|m| m.u),
                mwu_p: mwu.map(|m| m.p),
            })
        })
        .collect()
}
